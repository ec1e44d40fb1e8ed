//! Posterior predictive checks for both submodels.
//!
//! Longitudinal check: per retained draw, a chi-square discrepancy
//! T = Σⱼ uⱼ²/σ²_w(regime j) is computed on the observed series and on a
//! replicate generated from that draw (mean structure plus an AR(1) error
//! recursion started at stationarity), with u the whitened innovations from
//! the same code path as the likelihood. The per-subject p-value is the
//! fraction of draws where the observed discrepancy is below the replicated
//! one. Outcome check: the total event count of replicated outcomes against
//! the observed count.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Prepared, PreparedSubject};
use crate::error::Result;
use crate::likelihood::{eta_linear, Scaling, SubjectParams};
use crate::math::norm_cdf;
use crate::sampler::StateSnapshot;

/// Chi-square discrepancy of one series under one parameter draw.
fn discrepancy(subj: &PreparedSubject, values: &[f64], sp: &SubjectParams, beta0: f64) -> f64 {
    let rho = sp.rho;
    let s1m = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let inv_w: Vec<f64> = sp.log_sigma2_w.iter().map(|x| (-x).exp()).collect();
    let mut t = 0.0;
    let mut prev = 0.0;
    for j in 0..values.len() {
        let r = values[j] - beta0 - subj.rows[j].dot(&sp.b);
        let u = if j == 0 { r * s1m } else { r - rho * prev };
        prev = r;
        t += u * u * inv_w[subj.obs_regime[j]];
    }
    t
}

/// Simulate one subject's series from a parameter draw: fitted mean plus
/// AR(1) errors with regime-resolved white noise, started at the stationary
/// variance of the first observation's regime. This is the model's exact
/// data law, shared by the predictive checks and consistency tests.
pub fn replicate_series(
    subj: &PreparedSubject,
    sp: &SubjectParams,
    beta0: f64,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<f64>,
) {
    let rho = sp.rho;
    let sigma_w: Vec<f64> = sp.log_sigma2_w.iter().map(|x| (0.5 * x).exp()).collect();
    let stationary_sd = sigma_w[subj.obs_regime[0]] / ((1.0 - rho) * (1.0 + rho)).sqrt();
    let mut e = stationary_sd * rng.sample::<f64, _>(StandardNormal);
    out.clear();
    for j in 0..subj.len() {
        let w = sigma_w[subj.obs_regime[j]] * rng.sample::<f64, _>(StandardNormal);
        e = rho * e + w;
        out.push(beta0 + subj.rows[j].dot(&sp.b) + e);
    }
}

/// Evenly thin `states` down to at most `n_rep` draws (all of them when
/// fewer are available).
fn select<'a>(states: &'a [&'a StateSnapshot], n_rep: usize) -> Vec<&'a StateSnapshot> {
    if states.len() <= n_rep {
        return states.to_vec();
    }
    (0..n_rep)
        .map(|k| states[k * states.len() / n_rep])
        .collect()
}

/// Per-subject posterior predictive p-values for the longitudinal submodel.
pub fn ppc_longitudinal(
    prepared: &Prepared,
    states: &[&StateSnapshot],
    n_rep: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let used = select(states, n_rep);
    let mut exceed = vec![0usize; prepared.subjects.len()];
    let mut rep = Vec::new();
    for state in &used {
        for (i, subj) in prepared.subjects.iter().enumerate() {
            let sp = &state.subjects[i];
            let t_obs = discrepancy(subj, &subj.values, sp, state.beta0);
            replicate_series(subj, sp, state.beta0, rng, &mut rep);
            let t_rep = discrepancy(subj, &rep, sp, state.beta0);
            if t_obs < t_rep {
                exceed[i] += 1;
            }
        }
    }
    Ok(exceed
        .into_iter()
        .map(|c| c as f64 / used.len() as f64)
        .collect())
}

/// Posterior predictive p-value for the outcome submodel's event count.
/// Returns (p-value, observed event count).
pub fn ppc_outcome(
    prepared: &Prepared,
    states: &[&StateSnapshot],
    n_rep: usize,
    scaling: &Scaling,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, usize)> {
    let t_obs: usize = prepared.subjects.iter().map(|s| s.outcome as usize).sum();
    let used = select(states, n_rep);
    let mut exceed = 0usize;
    for state in &used {
        let mut t_rep = 0usize;
        for (i, subj) in prepared.subjects.iter().enumerate() {
            let eta = eta_linear(
                &state.subjects[i],
                scaling,
                &state.alpha,
                &state.gamma,
                &subj.covariates,
            );
            t_rep += usize::from(rng.random::<f64>() < norm_cdf(eta));
        }
        if t_obs < t_rep {
            exceed += 1;
        }
    }
    Ok((exceed as f64 / used.len() as f64, t_obs))
}

/// Write per-subject longitudinal p-values.
pub fn write_ppc_longitudinal_csv(
    path: &Path,
    prepared: &Prepared,
    pvalues: &[f64],
    comment: Option<&str>,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["subject_id", "p_value"])?;
    for (subj, p) in prepared.subjects.iter().zip(pvalues) {
        w.write_record([subj.id.as_str(), &p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the outcome p-value and observed event count.
pub fn write_ppc_outcome_csv(
    path: &Path,
    pvalue: f64,
    t_obs: usize,
    comment: Option<&str>,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["statistic", "value"])?;
    w.write_record(["t_obs", &t_obs.to_string()])?;
    w.write_record(["p_value", &pvalue.to_string()])?;
    w.flush()?;
    Ok(())
}
