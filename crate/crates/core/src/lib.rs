//! Bayesian joint modeling of intensive longitudinal biomarker variability
//! and a cross-sectional binary outcome.
//!
//! The longitudinal submodel is a subject-level clamped cubic B-spline with
//! AR(1) errors; subject-level long-term (spline-coefficient) and short-term
//! (innovation) variances carry log-normal hierarchical priors and feed a
//! probit outcome submodel as predictors, so both data sources inform them.
//! The crate provides the Metropolis-within-Gibbs sampler for the joint
//! posterior, convergence diagnostics, a ground-truth simulator with a
//! replicate-study harness, the two-stage plug-in baseline it is compared
//! against, and posterior predictive checks.

pub mod band;
pub mod basis;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod likelihood;
pub mod math;
pub mod ppc;
pub mod runner;
pub mod sampler;
pub mod simulate;
pub mod twostage;

pub use error::{Error, Result};
