//! Exact log-density kernels for the joint model.
//!
//! The longitudinal likelihood is evaluated in O(n) per subject by
//! AR(1) whitening: with residuals ε and autocorrelation ρ, the innovations
//! u₁ = ε₁·√(1−ρ²), uⱼ = εⱼ − ρ·εⱼ₋₁ are independent Gaussians whose
//! variance is the (regime-resolved) innovation variance σ²_w of the
//! observation they land on, and the change of variables contributes
//! ½·ln(1−ρ²). The cross-sectional outcome enters through a probit link on
//! the log standard deviations.

use serde::{Deserialize, Serialize};

use crate::data::{Prepared, PreparedSubject};
use crate::error::{Error, Result};
use crate::math::{norm_logcdf, normal_logpdf, LN_2PI};

/// Per-subject parameters: spline coefficients, per-regime log-variances,
/// and the autocorrelation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    /// Spline coefficients, one per basis function.
    pub b: Vec<f64>,
    /// Long-term log-variances log σ²_b, one per regime.
    pub log_sigma2_b: Vec<f64>,
    /// Innovation log-variances log σ²_w, one per regime.
    pub log_sigma2_w: Vec<f64>,
    /// AR(1) autocorrelation in (0, 1).
    pub rho: f64,
}

impl SubjectParams {
    /// Residual-scale variance σ²_e = σ²_w / (1 − ρ²) for a regime; derived,
    /// never a free parameter.
    pub fn sigma2_e(&self, regime: usize) -> f64 {
        self.log_sigma2_w[regime].exp() / ((1.0 - self.rho) * (1.0 + self.rho))
    }
}

/// Population-level parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    /// Fixed intercept (biomarker units).
    pub beta0: f64,
    /// Hypermeans / hyperscales of the long-term log-variances, per regime.
    pub v_b: Vec<f64>,
    pub psi_b: Vec<f64>,
    /// Hypermeans / hyperscales of the innovation log-variances, per regime.
    pub v_w: Vec<f64>,
    pub psi_w: Vec<f64>,
    /// Outcome coefficients: intercept, then one per short-term regime, then
    /// one per long-term regime (regime order as in the data).
    pub alpha: Vec<f64>,
    /// Baseline-covariate coefficients.
    pub gamma: Vec<f64>,
}

/// Scaling constants applied inside the log of the outcome predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scaling {
    /// σ_w is multiplied by this before the log.
    pub sigma_w_multiplier: f64,
    /// σ_b is divided by this before the log.
    pub sigma_b_divisor: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Self {
            sigma_w_multiplier: 10.0,
            sigma_b_divisor: 10.0,
        }
    }
}

/// Whiten AR(1) residuals into independent innovations.
///
/// Returns the innovations and the log-Jacobian ½·ln(1−ρ²) from the
/// stationarity scaling of the first term.
pub fn whiten_ar1(residuals: &[f64], rho: f64) -> Result<(Vec<f64>, f64)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho must be in (0, 1), got {rho}")));
    }
    let mut innovations = Vec::with_capacity(residuals.len());
    let log_jacobian = whiten_ar1_into(residuals, rho, &mut innovations);
    Ok((innovations, log_jacobian))
}

/// No-alloc core of [`whiten_ar1`]; `rho` must already be validated.
pub(crate) fn whiten_ar1_into(residuals: &[f64], rho: f64, out: &mut Vec<f64>) -> f64 {
    let one_minus_rho2 = (1.0 - rho) * (1.0 + rho);
    out.clear();
    if residuals.is_empty() {
        return 0.5 * one_minus_rho2.ln();
    }
    out.push(residuals[0] * one_minus_rho2.sqrt());
    for j in 1..residuals.len() {
        out.push(residuals[j] - rho * residuals[j - 1]);
    }
    0.5 * one_minus_rho2.ln()
}

/// Gaussian log-density of one subject's series given its parameters, via
/// whitening. Innovation j uses the variance of observation j's regime.
pub fn loglik_subject_long(subj: &PreparedSubject, sp: &SubjectParams, beta0: f64) -> f64 {
    let n = subj.len();
    let rho = sp.rho;
    let one_minus_rho2 = (1.0 - rho) * (1.0 + rho);
    let sigma2_w: Vec<f64> = sp.log_sigma2_w.iter().map(|x| x.exp()).collect();
    let resid = |j: usize| subj.values[j] - beta0 - subj.rows[j].dot(&sp.b);
    let mut ll = 0.5 * one_minus_rho2.ln();
    let mut prev = 0.0;
    for j in 0..n {
        let r = resid(j);
        let u = if j == 0 {
            r * one_minus_rho2.sqrt()
        } else {
            r - rho * prev
        };
        prev = r;
        let var = sigma2_w[subj.obs_regime[j]];
        ll -= 0.5 * (LN_2PI + var.ln() + u * u / var);
    }
    ll
}

/// Log-prior of the spline coefficients under their regime's σ²_b.
pub fn logprior_b(sp: &SubjectParams, coef_regime: &[usize]) -> f64 {
    let sigma2_b: Vec<f64> = sp.log_sigma2_b.iter().map(|x| x.exp()).collect();
    sp.b
        .iter()
        .zip(coef_regime)
        .map(|(&b, &k)| normal_logpdf(b, 0.0, sigma2_b[k]))
        .sum()
}

/// Linear predictor of the outcome submodel.
///
/// Coefficient layout: `alpha[0]` is the intercept; `alpha[1 + k]` multiplies
/// log(σ_w⁽ᵏ⁾ · c_w) and `alpha[1 + K + k]` multiplies log(σ_b⁽ᵏ⁾ / c_b),
/// with regimes k = 0..K in data order; `gamma` multiplies the baseline
/// covariates.
pub fn eta_linear(
    sp: &SubjectParams,
    scaling: &Scaling,
    alpha: &[f64],
    gamma: &[f64],
    covariates: &[f64],
) -> f64 {
    let k = sp.log_sigma2_w.len();
    debug_assert_eq!(sp.log_sigma2_b.len(), k);
    debug_assert_eq!(alpha.len(), 1 + 2 * k);
    let mut eta = alpha[0];
    let ln_cw = scaling.sigma_w_multiplier.ln();
    let ln_cb = scaling.sigma_b_divisor.ln();
    for (r, &ls2w) in sp.log_sigma2_w.iter().enumerate() {
        eta += alpha[1 + r] * (0.5 * ls2w + ln_cw);
    }
    for (r, &ls2b) in sp.log_sigma2_b.iter().enumerate() {
        eta += alpha[1 + k + r] * (0.5 * ls2b - ln_cb);
    }
    for (g, z) in gamma.iter().zip(covariates) {
        eta += g * z;
    }
    eta
}

/// The outcome design row matching [`eta_linear`]'s coefficient layout:
/// `(1, log(σ_w·c_w)…, log(σ_b/c_b)…, Z…)`.
pub fn outcome_row(sp: &SubjectParams, scaling: &Scaling, covariates: &[f64]) -> Vec<f64> {
    let k = sp.log_sigma2_w.len();
    let ln_cw = scaling.sigma_w_multiplier.ln();
    let ln_cb = scaling.sigma_b_divisor.ln();
    let mut row = Vec::with_capacity(1 + 2 * k + covariates.len());
    row.push(1.0);
    for &ls2w in &sp.log_sigma2_w {
        row.push(0.5 * ls2w + ln_cw);
    }
    for &ls2b in &sp.log_sigma2_b {
        row.push(0.5 * ls2b - ln_cb);
    }
    row.extend_from_slice(covariates);
    row
}

/// Probit Bernoulli log-likelihood, stable for extreme η.
pub fn loglik_outcome(y: u8, eta: f64) -> f64 {
    if y == 1 {
        norm_logcdf(eta)
    } else {
        norm_logcdf(-eta)
    }
}

/// Full parameter state of the joint model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub global: GlobalParams,
    pub subjects: Vec<SubjectParams>,
    /// Probit latent per subject, refreshed by the outcome block.
    pub z: Vec<f64>,
}

/// Prior hyperparameter constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Fixed-effect prior sd.
    pub psi: f64,
    /// Outcome-coefficient prior sd.
    pub omega: f64,
    /// Hypermean prior mean/sd for the long-term law.
    pub m_b: f64,
    pub kappa_b: f64,
    /// Half-Cauchy scale for Ψ_b.
    pub tau_b: f64,
    /// Hypermean prior mean/sd for the short-term law.
    pub m_w: f64,
    pub kappa_w: f64,
    /// Half-Cauchy scale for Ψ_w.
    pub tau_w: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            psi: 1000.0,
            omega: 10.0,
            m_b: 0.0,
            kappa_b: 1000.0,
            tau_b: 2.5,
            m_w: 0.0,
            kappa_w: 1000.0,
            tau_w: 2.5,
        }
    }
}

/// Log of the joint density of data and parameters (up to the uniform-ρ
/// constant). Used for sanity assertions: every accepted Metropolis move
/// must change this by exactly the accepted log-ratio.
pub fn log_joint(
    prepared: &Prepared,
    state: &ParamState,
    priors: &PriorConfig,
    scaling: &Scaling,
) -> f64 {
    let g = &state.global;
    let mut total = normal_logpdf(g.beta0, 0.0, priors.psi * priors.psi);
    for k in 0..prepared.n_regimes() {
        total += normal_logpdf(g.v_b[k], priors.m_b, priors.kappa_b * priors.kappa_b);
        total += crate::math::half_cauchy_logpdf(g.psi_b[k], priors.tau_b);
        total += normal_logpdf(g.v_w[k], priors.m_w, priors.kappa_w * priors.kappa_w);
        total += crate::math::half_cauchy_logpdf(g.psi_w[k], priors.tau_w);
    }
    for a in g.alpha.iter().chain(&g.gamma) {
        total += normal_logpdf(*a, 0.0, priors.omega * priors.omega);
    }
    for (subj, sp) in prepared.subjects.iter().zip(&state.subjects) {
        if !(sp.rho > 0.0 && sp.rho < 1.0) {
            return f64::NEG_INFINITY;
        }
        total += loglik_subject_long(subj, sp, g.beta0);
        total += logprior_b(sp, &subj.coef_regime);
        for k in 0..prepared.n_regimes() {
            total += normal_logpdf(sp.log_sigma2_b[k], g.v_b[k], g.psi_b[k] * g.psi_b[k]);
            total += normal_logpdf(sp.log_sigma2_w[k], g.v_w[k], g.psi_w[k] * g.psi_w[k]);
        }
        let eta = eta_linear(sp, scaling, &g.alpha, &g.gamma, &subj.covariates);
        total += loglik_outcome(subj.outcome, eta);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_knots;
    use crate::math::seeded_rng;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Dense multivariate-normal oracle: covariance σ²_e · ρ^|s−k|.
    pub(crate) fn dense_ar1_loglik(residuals: &[f64], rho: f64, sigma2_w: f64) -> f64 {
        let n = residuals.len();
        let sigma2_e = sigma2_w / (1.0 - rho * rho);
        let cov = DMatrix::from_fn(n, n, |r, c| {
            sigma2_e * rho.powi((r as i32 - c as i32).abs())
        });
        let chol = cov.cholesky().expect("AR(1) covariance is SPD");
        let x = nalgebra::DVector::from_column_slice(residuals);
        let solved = chol.solve(&x);
        let logdet: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        -0.5 * (n as f64 * LN_2PI + logdet + x.dot(&solved))
    }

    fn toy_subject(values: Vec<f64>, percentile_step: f64) -> PreparedSubject {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let basis = build_knots(&times, percentile_step, 3).unwrap();
        PreparedSubject {
            id: "t".into(),
            rows: times.iter().map(|&t| basis.design_row(t).unwrap()).collect(),
            obs_regime: vec![0; values.len()],
            coef_regime: vec![0; basis.basis_count()],
            values,
            outcome: 0,
            covariates: vec![],
        }
    }

    fn zero_spline_params(subj: &PreparedSubject, log_sigma2_w: f64, rho: f64) -> SubjectParams {
        let l = subj.rows.iter().map(|r| r.start + r.vals.len()).max().unwrap();
        SubjectParams {
            b: vec![0.0; l],
            log_sigma2_b: vec![0.0],
            log_sigma2_w: vec![log_sigma2_w],
            rho,
        }
    }

    #[test]
    fn whitening_limits_and_hand_case() {
        let (u, _) = whiten_ar1(&[1.0, 2.0, -1.0], 1e-12).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u[1], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u[2], -1.0, epsilon = 1e-9);

        let (u, lj) = whiten_ar1(&[1.0, 1.0, 1.0], 0.5).unwrap();
        assert_abs_diff_eq!(u[0], 0.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(u[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u[2], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lj, 0.5 * 0.75f64.ln(), epsilon = 1e-15);

        assert!(whiten_ar1(&[1.0], 1.0).is_err());
        assert!(whiten_ar1(&[1.0], 0.0).is_err());
        assert!(whiten_ar1(&[1.0], -0.2).is_err());
    }

    #[test]
    fn whitened_loglik_matches_dense_oracle() {
        let mut rng = seeded_rng(21, &[0]);
        for _ in 0..30 {
            let n = 2 + (rng.random::<u64>() % 49) as usize;
            let rho = 0.01 + 0.989 * rng.random::<f64>();
            let sigma2_w = (0.5 + rng.random::<f64>()).exp();
            let residuals: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0)
                .collect();
            let (u, lj) = whiten_ar1(&residuals, rho).unwrap();
            let whitened: f64 = lj
                + u.iter()
                    .map(|&ui| -0.5 * (LN_2PI + sigma2_w.ln() + ui * ui / sigma2_w))
                    .sum::<f64>();
            let dense = dense_ar1_loglik(&residuals, rho, sigma2_w);
            assert_abs_diff_eq!(whitened, dense, epsilon = 1e-8);
        }
    }

    #[test]
    fn subject_loglik_matches_dense_oracle_n40() {
        let mut rng = seeded_rng(22, &[0]);
        let values: Vec<f64> = (0..40)
            .map(|_| 80.0 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let subj = toy_subject(values.clone(), 25.0);
        let sp = zero_spline_params(&subj, 0.4, 0.85);
        let ll = loglik_subject_long(&subj, &sp, 80.0);
        let residuals: Vec<f64> = values.iter().map(|v| v - 80.0).collect();
        let dense = dense_ar1_loglik(&residuals, 0.85, 0.4f64.exp());
        assert_abs_diff_eq!(ll, dense, epsilon = 1e-8);
    }

    #[test]
    fn zero_residuals_unit_variance_gives_normalizing_constant() {
        let n = 17;
        let subj = toy_subject(vec![5.0; n], 25.0);
        let mut sp = zero_spline_params(&subj, 0.0, 1e-12);
        // rho ~ 0 is outside (0,1) support of the sampler but fine here via
        // a tiny positive value; the Jacobian term vanishes.
        sp.rho = 1e-9;
        let ll = loglik_subject_long(&subj, &sp, 5.0);
        assert_abs_diff_eq!(ll, -(n as f64) / 2.0 * LN_2PI, epsilon = 1e-9);
    }

    #[test]
    fn doubling_sigma_w_moves_loglik_in_the_right_direction() {
        let n = 25;
        let big: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 10.0 } else { -10.0 }).collect();
        let subj_big = toy_subject(big, 25.0);
        let sp1 = zero_spline_params(&subj_big, 0.0, 0.5);
        let mut sp2 = sp1.clone();
        sp2.log_sigma2_w = vec![2.0f64.ln() * 2.0]; // doubles σ_w
        assert!(
            loglik_subject_long(&subj_big, &sp2, 0.0) > loglik_subject_long(&subj_big, &sp1, 0.0),
            "large residuals prefer larger variance"
        );

        let subj_zero = toy_subject(vec![0.0; n], 25.0);
        assert!(
            loglik_subject_long(&subj_zero, &sp2, 0.0) < loglik_subject_long(&subj_zero, &sp1, 0.0),
            "zero residuals prefer smaller variance"
        );
    }

    #[test]
    fn eta_example_from_single_regime_scaling() {
        let sp = SubjectParams {
            b: vec![],
            log_sigma2_b: vec![(10.0f64).ln() * 2.0], // σ_b = 10
            log_sigma2_w: vec![(0.1f64).ln() * 2.0],  // σ_w = 0.1
            rho: 0.5,
        };
        let scaling = Scaling {
            sigma_w_multiplier: 10.0,
            sigma_b_divisor: 10.0,
        };
        let eta = eta_linear(&sp, &scaling, &[0.3, -1.0, 0.5], &[], &[]);
        assert_abs_diff_eq!(eta, 0.3, epsilon = 1e-12);

        let zero = eta_linear(&sp, &scaling, &[0.0, 0.0, 0.0], &[], &[]);
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn five_regimes_consume_eleven_coefficients() {
        let sp = SubjectParams {
            b: vec![],
            log_sigma2_b: vec![0.0; 5],
            log_sigma2_w: vec![0.0; 5],
            rho: 0.5,
        };
        let alpha: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let row = outcome_row(&sp, &Scaling::default(), &[]);
        assert_eq!(row.len(), 11);
        let eta = eta_linear(&sp, &Scaling::default(), &alpha, &[], &[]);
        let dot: f64 = row.iter().zip(&alpha).map(|(r, a)| r * a).sum();
        assert_abs_diff_eq!(eta, dot, epsilon = 1e-12);
    }

    #[test]
    fn outcome_loglik_is_stable_and_normalized() {
        assert_abs_diff_eq!(loglik_outcome(1, 0.0), 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(loglik_outcome(0, 0.0), 0.5f64.ln(), epsilon = 1e-15);
        let v = loglik_outcome(1, -10.0);
        assert!(v.is_finite() && v < -20.0, "got {v}");
        assert!(loglik_outcome(1, -300.0).is_finite());

        let mut rng = seeded_rng(23, &[0]);
        for _ in 0..100 {
            let eta = rng.sample::<f64, _>(StandardNormal) * 4.0;
            let total = loglik_outcome(1, eta).exp() + loglik_outcome(0, eta).exp();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn outcome_loglik_monotone_in_eta() {
        // Strict monotonicity up to |η| = 30; past ~38 the survival function
        // underflows and log-likelihoods tie at exactly 0.
        let etas: Vec<f64> = (-60..=60).map(|i| i as f64 * 0.5).collect();
        for w in etas.windows(2) {
            assert!(loglik_outcome(1, w[1]) > loglik_outcome(1, w[0]), "at {}", w[0]);
            assert!(loglik_outcome(0, w[1]) < loglik_outcome(0, w[0]), "at {}", w[0]);
        }
    }

    #[test]
    fn whitening_implies_stationary_first_variance() {
        // Long simulated AR(1) chain: marginal variance ≈ σ²_w / (1 − ρ²).
        let rho: f64 = 0.9;
        let sigma_w = 1.3;
        let mut rng = seeded_rng(24, &[0]);
        let n = 1_000_000;
        let mut e: f64 = 0.0;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..(n + 1000) {
            e = rho * e + sigma_w * rng.sample::<f64, _>(StandardNormal);
            if i >= 1000 {
                sum += e;
                sumsq += e * e;
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let expected = sigma_w * sigma_w / (1.0 - rho * rho);
        assert!(
            (var - expected).abs() / expected < 0.02,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn log_joint_finite_for_valid_random_states() {
        use crate::data::{Dataset, LoadOptions, LoadReport, SubjectSeries};
        let mut rng = seeded_rng(25, &[0]);
        let subjects: Vec<SubjectSeries> = (0..3)
            .map(|i| SubjectSeries {
                id: format!("s{i}"),
                times: (0..20).map(|j| j as f64).collect(),
                values: (0..20)
                    .map(|_| 70.0 + rng.sample::<f64, _>(StandardNormal) * 5.0)
                    .collect(),
                periods: None,
                outcome: Some((i % 2) as u8),
                covariates: vec![],
            })
            .collect();
        let opts = LoadOptions {
            percentile_step: 20.0,
            ..LoadOptions::default()
        };
        let ds = Dataset::build(subjects, &opts, &mut LoadReport::default()).unwrap();
        let prepared = ds.prepare().unwrap();
        let priors = PriorConfig::default();
        let scaling = Scaling::default();
        for _ in 0..50 {
            let state = ParamState {
                global: GlobalParams {
                    beta0: rng.sample::<f64, _>(StandardNormal) * 50.0,
                    v_b: vec![rng.sample::<f64, _>(StandardNormal) * 3.0],
                    psi_b: vec![rng.random::<f64>() * 4.0 + 0.01],
                    v_w: vec![rng.sample::<f64, _>(StandardNormal) * 3.0],
                    psi_w: vec![rng.random::<f64>() * 4.0 + 0.01],
                    alpha: (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
                    gamma: vec![],
                },
                subjects: (0..3)
                    .map(|_| SubjectParams {
                        b: (0..prepared.basis.basis_count())
                            .map(|_| rng.sample::<f64, _>(StandardNormal) * 10.0)
                            .collect(),
                        log_sigma2_b: vec![rng.sample::<f64, _>(StandardNormal) * 4.0],
                        log_sigma2_w: vec![rng.sample::<f64, _>(StandardNormal) * 4.0],
                        rho: rng.random::<f64>() * 0.998 + 0.001,
                    })
                    .collect(),
                z: vec![0.0; 3],
            };
            let lj = log_joint(&prepared, &state, &priors, &scaling);
            assert!(lj.is_finite(), "log_joint not finite: {lj}");
        }
    }
}
