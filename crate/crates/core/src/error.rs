//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient knots: need at least {needed} distinct breakpoints, found {found}")]
    InsufficientKnots { needed: usize, found: usize },

    #[error("time {t} outside basis domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("matrix not positive definite in {0}")]
    NotPositiveDefinite(&'static str),

    #[error("non-finite {quantity}: {detail}")]
    NonFinite { quantity: &'static str, detail: String },

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
