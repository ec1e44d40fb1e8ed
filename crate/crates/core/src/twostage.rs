//! Two-stage plug-in baseline.
//!
//! Stage 1 fits a homogeneous linear mixed model by maximum likelihood: one
//! shared coefficient variance, one shared innovation variance, and one
//! shared AR(1) autocorrelation across subjects (heterogeneity in the data
//! is deliberately ignored; that mismatch is the point of the baseline).
//! The 3-dimensional profile marginal likelihood is maximized with a
//! derivative-free simplex; the inner step is a whitened penalized least
//! squares producing the intercept and per-subject coefficient predictions.
//! Stage 2 regresses the binary outcome on the per-subject empirical
//! variabilities by Newton–Raphson probit with Wald intervals.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::{Prepared, PreparedSubject};
use crate::error::{Error, Result};
use crate::likelihood::Scaling;
use crate::math::{expit, logit, norm_logcdf, norm_logpdf, LN_2PI};

/// Stage-1 maximum-likelihood fit of the homogeneous mixed model.
#[derive(Debug, Clone)]
pub struct Stage1Fit {
    pub beta0_hat: f64,
    /// Per-subject coefficient predictions (empirical BLUPs).
    pub b_hat: Vec<Vec<f64>>,
    pub rho_hat: f64,
    /// Shared coefficient variance.
    pub sigma2_b_hat: f64,
    /// Shared innovation variance.
    pub sigma2_w_hat: f64,
    pub log_likelihood: f64,
    pub converged: bool,
}

struct SubjectStats {
    /// Gram matrix of the whitened, noise-scaled design.
    a0: DMatrix<f64>,
    /// Design' * whitened intercept column.
    u0: DVector<f64>,
    /// Design' * whitened response.
    ux: DVector<f64>,
    c00: f64,
    c0x: f64,
    xx: f64,
    n: usize,
}

/// Whitened cross-products for one subject at (ρ, σ²_w). All quantities
/// carry the 1/σ²_w weight, so the implied noise covariance is the identity.
fn subject_stats(subj: &PreparedSubject, l_count: usize, rho: f64, sigma2_w: f64) -> SubjectStats {
    let n = subj.len();
    let s1m = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let weight = 1.0 / sigma2_w;
    let mut a0 = DMatrix::<f64>::zeros(l_count, l_count);
    let mut u0 = DVector::<f64>::zeros(l_count);
    let mut ux = DVector::<f64>::zeros(l_count);
    let (mut c00, mut c0x, mut xx) = (0.0, 0.0, 0.0);
    let mut wrow = vec![0.0f64; l_count];
    let mut prev: Option<(&crate::basis::SparseRow, f64)> = None;
    for j in 0..n {
        let row = &subj.rows[j];
        let yj = subj.values[j];
        let (wstart, wlen, wy, wc) = match prev {
            None => {
                let wlen = row.vals.len();
                for (a, &v) in row.vals.iter().enumerate() {
                    wrow[a] = s1m * v;
                }
                (row.start, wlen, s1m * yj, s1m)
            }
            Some((prow, py)) => {
                let wstart = prow.start;
                let wlen = row.start + row.vals.len() - wstart;
                wrow[..wlen].fill(0.0);
                let off = row.start - wstart;
                for (a, &v) in row.vals.iter().enumerate() {
                    wrow[off + a] = v;
                }
                for (a, &v) in prow.vals.iter().enumerate() {
                    wrow[a] -= rho * v;
                }
                (wstart, wlen, yj - rho * py, 1.0 - rho)
            }
        };
        for a in 0..wlen {
            let va = wrow[a];
            if va == 0.0 {
                continue;
            }
            let vaw = va * weight;
            u0[wstart + a] += vaw * wc;
            ux[wstart + a] += vaw * wy;
            for c in a..wlen {
                a0[(wstart + c, wstart + a)] += vaw * wrow[c];
            }
        }
        c00 += wc * wc * weight;
        c0x += wc * wy * weight;
        xx += wy * wy * weight;
        prev = Some((row, yj));
    }
    SubjectStats {
        a0,
        u0,
        ux,
        c00,
        c0x,
        xx,
        n,
    }
}

struct ProfileEval {
    loglik: f64,
    beta0: f64,
    factors: Vec<(Cholesky<f64, Dyn>, DVector<f64>, DVector<f64>)>,
}

/// Profile marginal log-likelihood over the intercept at fixed variance
/// parameters, marginalizing the coefficients analytically.
fn profile_loglik(
    prepared: &Prepared,
    log_sigma2_b: f64,
    log_sigma2_w: f64,
    logit_rho: f64,
    keep_factors: bool,
) -> Result<ProfileEval> {
    let sigma2_b = log_sigma2_b.exp();
    let sigma2_w = log_sigma2_w.exp();
    let rho = expit(logit_rho);
    let l_count = prepared.basis.basis_count();
    let lf = l_count as f64;

    let mut sum_a = 0.0;
    let mut sum_m = 0.0;
    let mut loglik = 0.0;
    let mut per_subject = Vec::with_capacity(prepared.subjects.len());
    let mut factors = Vec::new();
    for subj in &prepared.subjects {
        let stats = subject_stats(subj, l_count, rho, sigma2_w);
        let mut a = stats.a0.clone();
        for l in 0..l_count {
            a[(l, l)] += 1.0 / sigma2_b;
        }
        let chol = a
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("stage-1 coefficient precision"))?;
        let logdet_a: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let a_inv_u0 = chol.solve(&stats.u0);
        let a_inv_ux = chol.solve(&stats.ux);
        let a_i = stats.c00 - stats.u0.dot(&a_inv_u0);
        let m_i = stats.c0x - stats.u0.dot(&a_inv_ux);
        let q_i = stats.xx - stats.ux.dot(&a_inv_ux);
        sum_a += a_i;
        sum_m += m_i;
        per_subject.push((a_i, m_i, q_i));
        loglik += -0.5 * (logdet_a + lf * sigma2_b.ln())
            - 0.5 * stats.n as f64 * (LN_2PI + sigma2_w.ln())
            + 0.5 * ((1.0 - rho) * (1.0 + rho)).ln();
        if keep_factors {
            factors.push((chol, stats.u0, stats.ux));
        }
    }
    let beta0 = sum_m / sum_a;
    for (a_i, m_i, q_i) in per_subject {
        loglik -= 0.5 * (q_i - 2.0 * beta0 * m_i + beta0 * beta0 * a_i);
    }
    Ok(ProfileEval {
        loglik,
        beta0,
        factors,
    })
}

/// Nelder–Mead on a 3-dimensional objective (minimization).
fn nelder_mead<F: FnMut(&[f64; 3]) -> f64>(
    mut f: F,
    x0: [f64; 3],
    spread: [f64; 3],
    tol: f64,
    max_iter: usize,
) -> ([f64; 3], f64, bool) {
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((x0, f(&x0)));
    for d in 0..3 {
        let mut x = x0;
        x[d] += spread[d];
        simplex.push((x, f(&x)));
    }
    let mut converged = false;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                (0..3)
                    .map(|d| (x[d] - best[d]).abs() / (1.0 + best[d].abs()))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < tol {
            converged = true;
            break;
        }
        let worst = simplex[3];
        let centroid = {
            let mut c = [0.0; 3];
            for (x, _) in &simplex[..3] {
                for d in 0..3 {
                    c[d] += x[d] / 3.0;
                }
            }
            c
        };
        let reflect = std::array::from_fn(|d| centroid[d] + (centroid[d] - worst.0[d]));
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let expand = std::array::from_fn(|d| centroid[d] + 2.0 * (centroid[d] - worst.0[d]));
            let fe = f(&expand);
            simplex[3] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflect, fr);
        } else {
            let contract = std::array::from_fn(|d| centroid[d] + 0.5 * (worst.0[d] - centroid[d]));
            let fc = f(&contract);
            if fc < worst.1 {
                simplex[3] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                for i in 1..4 {
                    let x: [f64; 3] =
                        std::array::from_fn(|d| best[d] + 0.5 * (simplex[i].0[d] - best[d]));
                    simplex[i] = (x, f(&x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    (simplex[0].0, simplex[0].1, converged)
}

/// Maximize the stage-1 marginal likelihood and return the fit with BLUPs.
pub fn stage1_fit(prepared: &Prepared) -> Result<Stage1Fit> {
    // Data-scaled start: pooled mean squared successive difference for the
    // innovation variance, pooled within-subject variance for the
    // coefficient variance.
    let mut msd = 0.0;
    let mut msd_n = 0.0;
    let mut within = 0.0;
    let mut within_n = 0.0;
    for subj in &prepared.subjects {
        for j in 1..subj.len() {
            let d = subj.values[j] - subj.values[j - 1];
            msd += d * d;
            msd_n += 1.0;
        }
        let m = subj.values.iter().sum::<f64>() / subj.len() as f64;
        within += subj.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        within_n += subj.len() as f64;
    }
    let lsw0 = (msd / msd_n / 2.0).max(1e-6).ln();
    let lsb0 = (within / within_n).max(1e-6).ln();
    let x0 = [lsb0, lsw0, logit(0.9)];

    let mut objective = |x: &[f64; 3]| match profile_loglik(prepared, x[0], x[1], x[2], false) {
        Ok(eval) => -eval.loglik,
        Err(_) => f64::INFINITY,
    };
    let (x, _, converged) = nelder_mead(&mut objective, x0, [1.0, 1.0, 1.0], 1e-6, 600);

    let eval = profile_loglik(prepared, x[0], x[1], x[2], true)?;
    let beta0 = eval.beta0;
    let b_hat: Vec<Vec<f64>> = eval
        .factors
        .iter()
        .map(|(chol, u0, ux)| {
            let rhs = ux - u0 * beta0;
            chol.solve(&rhs).iter().copied().collect()
        })
        .collect();
    Ok(Stage1Fit {
        beta0_hat: beta0,
        b_hat,
        rho_hat: expit(x[2]),
        sigma2_b_hat: x[0].exp(),
        sigma2_w_hat: x[1].exp(),
        log_likelihood: eval.loglik,
        converged,
    })
}

/// Empirical long-term variability: the sample variance (over l) of the
/// subject's predicted coefficients.
pub fn empirical_sigma2_b(fit: &Stage1Fit, subject: usize) -> f64 {
    let b = &fit.b_hat[subject];
    let l = b.len() as f64;
    let mean = b.iter().sum::<f64>() / l;
    b.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (l - 1.0)
}

/// Empirical short-term variability: one-step-ahead fitted values including
/// the autoregressive carry-over (with the pre-sample residual set to zero),
/// then the sample variance of the leftover noise.
pub fn empirical_sigma2_w(prepared: &Prepared, fit: &Stage1Fit, subject: usize) -> f64 {
    let subj = &prepared.subjects[subject];
    let b = &fit.b_hat[subject];
    let rho = fit.rho_hat;
    let n = subj.len();
    let mut w = Vec::with_capacity(n);
    let mut prev_eps = 0.0;
    for j in 0..n {
        let mean_fit = fit.beta0_hat + subj.rows[j].dot(b);
        let eps = subj.values[j] - mean_fit;
        w.push(eps - rho * prev_eps);
        prev_eps = eps;
    }
    let mean = w.iter().sum::<f64>() / n as f64;
    w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)
}

/// Stage-2 probit design rows: `(1, log(σ̂_w·c_w), log(σ̂_b/c_b))`.
pub fn probit_design(sigma2_b: &[f64], sigma2_w: &[f64], scaling: &Scaling) -> Vec<Vec<f64>> {
    sigma2_b
        .iter()
        .zip(sigma2_w)
        .map(|(&s2b, &s2w)| {
            vec![
                1.0,
                (s2w.sqrt() * scaling.sigma_w_multiplier).ln(),
                (s2b.sqrt() / scaling.sigma_b_divisor).ln(),
            ]
        })
        .collect()
}

/// Maximum-likelihood probit fit.
#[derive(Debug, Clone)]
pub struct ProbitFit {
    pub coefs: Vec<f64>,
    /// Wald standard errors from the observed information at the MLE.
    pub se: Vec<f64>,
    pub iterations: usize,
    /// ∞-norm of the score at the returned estimate.
    pub score_norm: f64,
}

/// Newton–Raphson probit regression with analytic score and observed
/// information. Separation (a diverging MLE) is reported as an error so the
/// replicate harness can exclude and count it.
pub fn stage2_probit(y: &[u8], rows: &[Vec<f64>]) -> Result<ProbitFit> {
    let n = y.len();
    if n == 0 || rows.len() != n {
        return Err(Error::Data("probit needs one design row per outcome".into()));
    }
    let p = rows[0].len();
    let mut theta = DVector::<f64>::zeros(p);
    let mut iterations = 0;
    let mut score_norm = f64::INFINITY;
    let mut info = DMatrix::<f64>::zeros(p, p);
    for it in 0..100 {
        iterations = it + 1;
        let mut score = DVector::<f64>::zeros(p);
        info.fill(0.0);
        for (yi, row) in y.iter().zip(rows) {
            let eta: f64 = row.iter().enumerate().map(|(a, r)| r * theta[a]).sum();
            // Inverse Mills ratios, stable via log cdfs.
            let (g, w) = if *yi == 1 {
                let lambda = (norm_logpdf(eta) - norm_logcdf(eta)).exp();
                (lambda, lambda * (lambda + eta))
            } else {
                let lambda = (norm_logpdf(eta) - norm_logcdf(-eta)).exp();
                (-lambda, lambda * (lambda - eta))
            };
            for a in 0..p {
                score[a] += g * row[a];
                for c in a..p {
                    info[(c, a)] += w * row[a] * row[c];
                }
            }
        }
        score_norm = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if score_norm < 1e-10 {
            break;
        }
        let chol = info
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NonConvergence("probit information is singular".into()))?;
        let delta = chol.solve(&score);
        theta += &delta;
        if theta.iter().any(|t| !t.is_finite() || t.abs() > 1e4) {
            return Err(Error::NonConvergence(
                "probit estimates diverged (separation)".into(),
            ));
        }
    }
    if score_norm > 1e-8 {
        return Err(Error::NonConvergence(format!(
            "probit score norm {score_norm} after {iterations} iterations"
        )));
    }
    let chol = info
        .cholesky()
        .ok_or_else(|| Error::NonConvergence("probit information is singular".into()))?;
    let se: Vec<f64> = (0..p)
        .map(|a| {
            let mut e = DVector::<f64>::zeros(p);
            e[a] = 1.0;
            chol.solve(&e)[a].sqrt()
        })
        .collect();
    // Under separation the score still vanishes (the likelihood flattens in
    // the tails) but the information collapses and Wald errors explode.
    if se.iter().any(|s| !s.is_finite() || *s > 1e3) {
        return Err(Error::NonConvergence(
            "probit information collapsed (separation)".into(),
        ));
    }
    Ok(ProbitFit {
        coefs: theta.iter().copied().collect(),
        se,
        iterations,
        score_norm,
    })
}
