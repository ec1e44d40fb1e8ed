//! Conditional updates of the Metropolis-within-Gibbs sweep.
//!
//! Conjugate Gaussian blocks: the intercept, each subject's spline
//! coefficients, the level-recentering move, the hypermeans, and the outcome
//! coefficients (via probit latent augmentation). Random-walk Metropolis:
//! per-subject per-regime log-variances (whose targets include the outcome
//! term through the shared parameters) and logit-autocorrelations.
//! Hyperscales use slice sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::band::BandChol;
use crate::data::{Prepared, PreparedSubject};
use crate::error::{Error, Result};
use crate::likelihood::{
    eta_linear, loglik_outcome, outcome_row, GlobalParams, ParamState, PriorConfig, Scaling,
    SubjectParams,
};
use crate::math::{
    expit, logit, normal_logpdf, sample_truncnorm_above, sample_truncnorm_below,
};

use super::slice::slice_sample_positive;

/// Result of one Metropolis proposal.
#[derive(Debug, Clone, Copy)]
pub struct MhOutcome {
    pub accepted: bool,
    /// min(1, exp(log-ratio)); used by step-size adaptation.
    pub acc_prob: f64,
    /// Change in the state-density terms (the joint log-density delta an
    /// accepted move produces; proposal Jacobians excluded).
    pub state_delta: f64,
}

impl MhOutcome {
    fn decide(state_delta: f64, jacobian_delta: f64, rng: &mut ChaCha8Rng) -> Self {
        let log_ratio = state_delta + jacobian_delta;
        let acc_prob = log_ratio.min(0.0).exp();
        let accepted = rng.random::<f64>().ln() < log_ratio;
        Self {
            accepted,
            acc_prob,
            state_delta,
        }
    }
}

/// Conjugate draw of the fixed intercept given whitened residuals.
pub fn update_beta0(
    prepared: &Prepared,
    state: &mut ParamState,
    priors: &PriorConfig,
    spline_fit: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) {
    let mut prec = 1.0 / (priors.psi * priors.psi);
    let mut num = 0.0;
    for (i, (subj, sp)) in prepared.subjects.iter().zip(&state.subjects).enumerate() {
        let rho = sp.rho;
        let s1m = ((1.0 - rho) * (1.0 + rho)).sqrt();
        let inv_w: Vec<f64> = sp.log_sigma2_w.iter().map(|x| (-x).exp()).collect();
        let fit = &spline_fit[i];
        let mut prev = 0.0;
        for j in 0..subj.len() {
            let g = subj.values[j] - fit[j];
            let (c, gy) = if j == 0 {
                (s1m, s1m * g)
            } else {
                (1.0 - rho, g - rho * prev)
            };
            let w = inv_w[subj.obs_regime[j]];
            prec += c * c * w;
            num += c * gy * w;
            prev = g;
        }
    }
    state.global.beta0 = num / prec + rng.sample::<f64, _>(StandardNormal) / prec.sqrt();
}

/// Per-subject workspace for the whitened spline normal equations, reused
/// across sweeps. After [`fill_normal_eqs`] the band factor holds L with
/// A = L Lᵀ the coefficient-conditional precision, and `w0`/`wx` hold
/// L⁻¹·(design'·whitened intercept column) and L⁻¹·(design'·whitened
/// response).
pub struct SplineScratch {
    pub(crate) band: BandChol,
    pub(crate) w0: Vec<f64>,
    pub(crate) wx: Vec<f64>,
    pub(crate) buf: Vec<f64>,
    pub(crate) wrow: Vec<f64>,
    pub(crate) c00: f64,
    pub(crate) c0x: f64,
    pub(crate) xx: f64,
    bandwidth: usize,
}

/// Widest whitened row (own span united with the previous observation's).
pub(crate) fn whitened_bandwidth(subj: &PreparedSubject) -> usize {
    let mut bw = 0usize;
    let mut prev_start = 0usize;
    for (j, row) in subj.rows.iter().enumerate() {
        let wstart = if j == 0 { row.start } else { prev_start };
        let wlen = row.start + row.vals.len() - wstart;
        bw = bw.max(wlen - 1);
        prev_start = row.start;
    }
    bw
}

impl SplineScratch {
    pub fn new(subj: &PreparedSubject, l_count: usize) -> Self {
        Self::with_bandwidth(whitened_bandwidth(subj), l_count)
    }

    /// Workspace sized for any subject whose whitened rows stay within
    /// `bandwidth`.
    pub fn with_bandwidth(bandwidth: usize, l_count: usize) -> Self {
        Self {
            band: BandChol::default(),
            w0: vec![0.0; l_count],
            wx: vec![0.0; l_count],
            buf: vec![0.0; l_count],
            wrow: vec![0.0; l_count],
            c00: 0.0,
            c0x: 0.0,
            xx: 0.0,
            bandwidth,
        }
    }

    /// −2 × the coefficient-marginal Gaussian exponent pieces that depend
    /// on (ρ, β0): log det of the coefficient precision plus the collapsed
    /// quadratic form.
    pub(crate) fn marginal_misfit(&self, beta0: f64) -> f64 {
        let mut quad = self.xx - 2.0 * beta0 * self.c0x + beta0 * beta0 * self.c00;
        for (w0, wx) in self.w0.iter().zip(&self.wx) {
            let r = wx - beta0 * w0;
            quad -= r * r;
        }
        self.band.log_det() + quad
    }
}

/// Build and factor the whitened normal equations of one subject: banded
/// Gram (rows weighted by their observation's innovation precision, plus
/// the diagonal coefficient-prior precision), intercept-column and response
/// cross products.
pub(crate) fn fill_normal_eqs(
    subj: &PreparedSubject,
    sp: &SubjectParams,
    scratch: &mut SplineScratch,
) -> Result<()> {
    let l_count = sp.b.len();
    let n = subj.len();
    let rho = sp.rho;
    let s1m = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let inv_w: Vec<f64> = sp.log_sigma2_w.iter().map(|x| (-x).exp()).collect();
    let inv_b: Vec<f64> = sp.log_sigma2_b.iter().map(|x| (-x).exp()).collect();

    scratch.band.reset(l_count, scratch.bandwidth);
    scratch.w0.iter_mut().for_each(|v| *v = 0.0);
    scratch.wx.iter_mut().for_each(|v| *v = 0.0);
    scratch.c00 = 0.0;
    scratch.c0x = 0.0;
    scratch.xx = 0.0;
    let wrow = &mut scratch.wrow;

    let mut prev: Option<(&crate::basis::SparseRow, f64)> = None;
    for j in 0..n {
        let row = &subj.rows[j];
        let yj = subj.values[j];
        let weight = inv_w[subj.obs_regime[j]];
        let (wstart, wlen, wy, wc) = match prev {
            None => {
                let wlen = row.vals.len();
                for (idx, &v) in row.vals.iter().enumerate() {
                    wrow[idx] = s1m * v;
                }
                (row.start, wlen, s1m * yj, s1m)
            }
            Some((prow, py)) => {
                // Rows are time-ordered, so prow.start <= row.start.
                let wstart = prow.start;
                let wlen = row.start + row.vals.len() - wstart;
                wrow[..wlen].fill(0.0);
                let off = row.start - wstart;
                for (idx, &v) in row.vals.iter().enumerate() {
                    wrow[off + idx] = v;
                }
                for (idx, &v) in prow.vals.iter().enumerate() {
                    wrow[idx] -= rho * v;
                }
                (wstart, wlen, yj - rho * py, 1.0 - rho)
            }
        };
        for r in 0..wlen {
            let vr = wrow[r];
            if vr == 0.0 {
                continue;
            }
            let vrw = vr * weight;
            scratch.w0[wstart + r] += vrw * wc;
            scratch.wx[wstart + r] += vrw * wy;
            for c in r..wlen {
                scratch.band.add(wstart + c, wstart + r, vrw * wrow[c]);
            }
        }
        scratch.c00 += wc * wc * weight;
        scratch.c0x += wc * wy * weight;
        scratch.xx += wy * wy * weight;
        prev = Some((row, yj));
    }
    for l in 0..l_count {
        scratch.band.add(l, l, inv_b[subj.coef_regime[l]]);
    }
    scratch.band.factor()?;
    scratch.band.solve_lower(&mut scratch.w0);
    scratch.band.solve_lower(&mut scratch.wx);
    Ok(())
}

/// Draw b | β0 from the factored normal equations:
/// b = L⁻ᵀ (wx − β0·w0 + z) with z standard normal.
fn draw_coefs_given_intercept(
    scratch: &mut SplineScratch,
    beta0: f64,
    b: &mut [f64],
    rng: &mut ChaCha8Rng,
) {
    for l in 0..b.len() {
        scratch.buf[l] =
            scratch.wx[l] - beta0 * scratch.w0[l] + rng.sample::<f64, _>(StandardNormal);
    }
    scratch.band.solve_lower_transpose(&mut scratch.buf);
    b.copy_from_slice(&scratch.buf);
}

/// Exact Gaussian draw of one subject's spline coefficients given the
/// intercept: precision is the whitened-design Gram matrix (rows weighted
/// by their observation's innovation precision) plus the diagonal
/// coefficient-prior precision.
pub fn update_spline_block(
    subj: &PreparedSubject,
    sp: &mut SubjectParams,
    beta0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut scratch = SplineScratch::new(subj, sp.b.len());
    fill_normal_eqs(subj, sp, &mut scratch)?;
    let mut b = std::mem::take(&mut sp.b);
    draw_coefs_given_intercept(&mut scratch, beta0, &mut b, rng);
    sp.b = b;
    Ok(())
}

/// Precision and precision-weighted mean of the intercept's conditional
/// with all spline coefficients integrated out.
pub fn level_conditional(
    prepared: &Prepared,
    state: &ParamState,
    priors: &PriorConfig,
) -> Result<(f64, f64)> {
    let l_count = prepared.basis.basis_count();
    let mut prec = 1.0 / (priors.psi * priors.psi);
    let mut num = 0.0;
    for (subj, sp) in prepared.subjects.iter().zip(&state.subjects) {
        let mut scratch = SplineScratch::new(subj, l_count);
        fill_normal_eqs(subj, sp, &mut scratch)?;
        let w00: f64 = scratch.w0.iter().map(|v| v * v).sum();
        let w0x: f64 = scratch.w0.iter().zip(&scratch.wx).map(|(a, b)| a * b).sum();
        prec += scratch.c00 - w00;
        num += scratch.c0x - w0x;
    }
    Ok((prec, num))
}

/// Blocked draw of (β0, every bᵢ): β0 comes from its exact conditional with
/// all spline coefficients integrated out, then each bᵢ from its
/// conditional given the new β0. One joint Gaussian block, so the intercept
/// does not random-walk against the coefficient field even when the
/// likelihood barely identifies the level.
pub fn update_level_block(
    prepared: &Prepared,
    state: &mut ParamState,
    priors: &PriorConfig,
    spline_fit: &mut [Vec<f64>],
    scratch: &mut [SplineScratch],
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut prec = 1.0 / (priors.psi * priors.psi);
    let mut num = 0.0;
    for ((subj, sp), sc) in prepared
        .subjects
        .iter()
        .zip(&state.subjects)
        .zip(scratch.iter_mut())
    {
        fill_normal_eqs(subj, sp, sc)?;
        let w00: f64 = sc.w0.iter().map(|v| v * v).sum();
        let w0x: f64 = sc.w0.iter().zip(&sc.wx).map(|(a, b)| a * b).sum();
        prec += sc.c00 - w00;
        num += sc.c0x - w0x;
    }
    let beta0 = num / prec + rng.sample::<f64, _>(StandardNormal) / prec.sqrt();
    state.global.beta0 = beta0;
    for (i, sc) in scratch.iter_mut().enumerate() {
        draw_coefs_given_intercept(sc, beta0, &mut state.subjects[i].b, rng);
        let subj = &prepared.subjects[i];
        let sp = &state.subjects[i];
        for j in 0..subj.len() {
            spline_fit[i][j] = subj.rows[j].dot(&sp.b);
        }
    }
    Ok(())
}

/// Gibbs move along the flat direction (β0 + c, b − c): the likelihood is
/// invariant because the basis sums to one, so c has an exact Gaussian
/// conditional from the priors. Keeps the level and the coefficient field
/// from random-walking against each other.
pub fn recenter_level(
    prepared: &Prepared,
    state: &mut ParamState,
    priors: &PriorConfig,
    spline_fit: &mut [Vec<f64>],
    rng: &mut ChaCha8Rng,
) {
    let mut prec = 1.0 / (priors.psi * priors.psi);
    let mut num = -state.global.beta0 / (priors.psi * priors.psi);
    for (subj, sp) in prepared.subjects.iter().zip(&state.subjects) {
        let inv_b: Vec<f64> = sp.log_sigma2_b.iter().map(|x| (-x).exp()).collect();
        for (l, &b) in sp.b.iter().enumerate() {
            let w = inv_b[subj.coef_regime[l]];
            prec += w;
            num += b * w;
        }
    }
    let c = num / prec + rng.sample::<f64, _>(StandardNormal) / prec.sqrt();
    state.global.beta0 += c;
    for (i, sp) in state.subjects.iter_mut().enumerate() {
        for b in sp.b.iter_mut() {
            *b -= c;
        }
        for f in spline_fit[i].iter_mut() {
            *f -= c;
        }
    }
}

/// Sum of squared coefficients and count for one regime.
pub fn coef_ss(subj: &PreparedSubject, sp: &SubjectParams, regime: usize) -> (f64, f64) {
    let mut ss = 0.0;
    let mut m = 0.0;
    for (l, &k) in subj.coef_regime.iter().enumerate() {
        if k == regime {
            ss += sp.b[l] * sp.b[l];
            m += 1.0;
        }
    }
    (ss, m)
}

/// Random-walk Metropolis on one long-term log-variance. The target couples
/// the coefficient prior, the hierarchical log-normal prior, and the outcome
/// probit term (σ_b appears in η).
#[allow(clippy::too_many_arguments)]
pub fn update_log_sigma2_b(
    subj: &PreparedSubject,
    sp: &mut SubjectParams,
    regime: usize,
    global: &GlobalParams,
    scaling: &Scaling,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> MhOutcome {
    let (ss, m) = coef_ss(subj, sp, regime);
    let v = global.v_b[regime];
    let psi2 = global.psi_b[regime] * global.psi_b[regime];
    let base = |x: f64| -0.5 * m * x - 0.5 * ss * (-x).exp() + normal_logpdf(x, v, psi2);

    let cur = sp.log_sigma2_b[regime];
    let eta_cur = eta_linear(sp, scaling, &global.alpha, &global.gamma, &subj.covariates);
    let t_cur = base(cur) + loglik_outcome(subj.outcome, eta_cur);

    let prop = cur + step * rng.sample::<f64, _>(StandardNormal);
    sp.log_sigma2_b[regime] = prop;
    let eta_prop = eta_linear(sp, scaling, &global.alpha, &global.gamma, &subj.covariates);
    let t_prop = base(prop) + loglik_outcome(subj.outcome, eta_prop);

    let outcome = MhOutcome::decide(t_prop - t_cur, 0.0, rng);
    if !outcome.accepted {
        sp.log_sigma2_b[regime] = cur;
    }
    outcome
}

/// Per-regime innovation sums of squares for the current residuals.
pub fn innovation_ss(
    subj: &PreparedSubject,
    sp: &SubjectParams,
    beta0: f64,
    spline_fit: &[f64],
    ss: &mut [f64],
    counts: &mut [f64],
) {
    ss.fill(0.0);
    counts.fill(0.0);
    let rho = sp.rho;
    let s1m = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let mut prev = 0.0;
    for j in 0..subj.len() {
        let r = subj.values[j] - beta0 - spline_fit[j];
        let u = if j == 0 { r * s1m } else { r - rho * prev };
        prev = r;
        let k = subj.obs_regime[j];
        ss[k] += u * u;
        counts[k] += 1.0;
    }
}

/// Random-walk Metropolis on one innovation log-variance; mirror image of
/// [`update_log_sigma2_b`] with whitened-innovation Gaussian terms.
#[allow(clippy::too_many_arguments)]
pub fn update_log_sigma2_w(
    subj: &PreparedSubject,
    sp: &mut SubjectParams,
    regime: usize,
    innovation_ss: f64,
    innovation_count: f64,
    global: &GlobalParams,
    scaling: &Scaling,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> MhOutcome {
    let v = global.v_w[regime];
    let psi2 = global.psi_w[regime] * global.psi_w[regime];
    let base = |x: f64| {
        -0.5 * innovation_count * x - 0.5 * innovation_ss * (-x).exp() + normal_logpdf(x, v, psi2)
    };

    let cur = sp.log_sigma2_w[regime];
    let eta_cur = eta_linear(sp, scaling, &global.alpha, &global.gamma, &subj.covariates);
    let t_cur = base(cur) + loglik_outcome(subj.outcome, eta_cur);

    let prop = cur + step * rng.sample::<f64, _>(StandardNormal);
    sp.log_sigma2_w[regime] = prop;
    let eta_prop = eta_linear(sp, scaling, &global.alpha, &global.gamma, &subj.covariates);
    let t_prop = base(prop) + loglik_outcome(subj.outcome, eta_prop);

    let outcome = MhOutcome::decide(t_prop - t_cur, 0.0, rng);
    if !outcome.accepted {
        sp.log_sigma2_w[regime] = cur;
    }
    outcome
}

/// Random-walk Metropolis on logit(ρ) with the Jacobian correction; the
/// logit parameterization keeps proposals inside (0, 1) by construction.
pub fn update_rho(
    subj: &PreparedSubject,
    sp: &mut SubjectParams,
    beta0: f64,
    spline_fit: &[f64],
    resid: &mut Vec<f64>,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> MhOutcome {
    resid.clear();
    resid.extend(
        (0..subj.len()).map(|j| subj.values[j] - beta0 - spline_fit[j]),
    );
    let inv_w: Vec<f64> = sp.log_sigma2_w.iter().map(|x| (-x).exp()).collect();
    // State-density terms that vary with rho (normalizing constants of the
    // innovation Gaussians do not).
    let loglik = |rho: f64| {
        let om = (1.0 - rho) * (1.0 + rho);
        let mut t = 0.5 * om.ln();
        let mut prev = 0.0;
        for j in 0..resid.len() {
            let u = if j == 0 {
                resid[0] * om.sqrt()
            } else {
                resid[j] - rho * prev
            };
            prev = resid[j];
            t -= 0.5 * u * u * inv_w[subj.obs_regime[j]];
        }
        t
    };

    let cur = sp.rho;
    let x = logit(cur);
    let x_prop = x + step * rng.sample::<f64, _>(StandardNormal);
    let prop = expit(x_prop);
    debug_assert!(prop > 0.0 && prop < 1.0);

    let state_delta = loglik(prop) - loglik(cur);
    let jacobian_delta = (prop.ln() + (1.0 - prop).ln()) - (cur.ln() + (1.0 - cur).ln());
    let outcome = MhOutcome::decide(state_delta, jacobian_delta, rng);
    if outcome.accepted {
        sp.rho = prop;
    }
    outcome
}

/// Joint block update of (ρ, b) for one subject: Metropolis on logit(ρ)
/// against the coefficient-marginal likelihood (b integrated out
/// analytically), then an exact redraw of b given the accepted ρ. Keeps ρ
/// from random-walking against the coefficient field, which otherwise
/// absorbs most of the autocorrelated error path.
#[allow(clippy::too_many_arguments)]
pub fn update_rho_coef_block(
    subj: &PreparedSubject,
    sp: &mut SubjectParams,
    beta0: f64,
    spline_fit: &mut [f64],
    cur: &mut SplineScratch,
    prop: &mut SplineScratch,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MhOutcome> {
    // Marginal target at the current autocorrelation.
    fill_normal_eqs(subj, sp, cur)?;
    let rho_cur = sp.rho;
    let om_cur = (1.0 - rho_cur) * (1.0 + rho_cur);
    let t_cur = 0.5 * om_cur.ln() - 0.5 * cur.marginal_misfit(beta0);

    let x_prop = logit(rho_cur) + step * rng.sample::<f64, _>(StandardNormal);
    let rho_prop = expit(x_prop);
    sp.rho = rho_prop;
    let outcome = match fill_normal_eqs(subj, sp, prop) {
        Ok(()) => {
            let om_prop = (1.0 - rho_prop) * (1.0 + rho_prop);
            let t_prop = 0.5 * om_prop.ln() - 0.5 * prop.marginal_misfit(beta0);
            let jacobian_delta = (rho_prop.ln() + (1.0 - rho_prop).ln())
                - (rho_cur.ln() + (1.0 - rho_cur).ln());
            MhOutcome::decide(t_prop - t_cur, jacobian_delta, rng)
        }
        // A numerically unfactorable proposal is simply rejected.
        Err(_) => MhOutcome {
            accepted: false,
            acc_prob: 0.0,
            state_delta: f64::NAN,
        },
    };
    let scratch = if outcome.accepted {
        prop
    } else {
        sp.rho = rho_cur;
        cur
    };
    let mut b = std::mem::take(&mut sp.b);
    draw_coefs_given_intercept(scratch, beta0, &mut b, rng);
    sp.b = b;
    for j in 0..subj.len() {
        spline_fit[j] = subj.rows[j].dot(&sp.b);
    }
    Ok(outcome)
}

/// Update one regime's hyperparameters: conjugate Gaussian for the
/// hypermean, slice sampling for the half-Cauchy–scaled hyperscale.
pub fn update_hyper_pair(
    xs: &[f64],
    prior_mean: f64,
    prior_sd: f64,
    tau: f64,
    v: &mut f64,
    psi: &mut f64,
    rng: &mut ChaCha8Rng,
) {
    let n = xs.len() as f64;
    let sum: f64 = xs.iter().sum();
    let psi2 = *psi * *psi;
    let prec = n / psi2 + 1.0 / (prior_sd * prior_sd);
    let mean = (sum / psi2 + prior_mean / (prior_sd * prior_sd)) / prec;
    *v = mean + rng.sample::<f64, _>(StandardNormal) / prec.sqrt();

    let s: f64 = xs.iter().map(|x| (x - *v) * (x - *v)).sum();
    if s < 1e-300 {
        return;
    }
    let logf = move |p: f64| {
        if p <= 0.0 {
            f64::NEG_INFINITY
        } else {
            -n * p.ln() - 0.5 * s / (p * p) - (1.0 + (p / tau) * (p / tau)).ln()
        }
    };
    // Interval width from the conditioning data only (never from the
    // current psi: a state-dependent width would break slice reversibility).
    let width = (s / n).sqrt().max(0.25);
    *psi = slice_sample_positive(logf, *psi, width, rng);
}

/// Probit latent-variable block: refresh z from its truncated-normal
/// conditional, then draw the outcome coefficients from their Gaussian
/// conditional given z.
pub fn update_outcome_coefs(
    prepared: &Prepared,
    state: &mut ParamState,
    priors: &PriorConfig,
    scaling: &Scaling,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n_alpha = state.global.alpha.len();
    let p = n_alpha + state.global.gamma.len();
    let theta: Vec<f64> = state
        .global
        .alpha
        .iter()
        .chain(&state.global.gamma)
        .copied()
        .collect();

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for (i, (subj, sp)) in prepared.subjects.iter().zip(&state.subjects).enumerate() {
        let row = outcome_row(sp, scaling, &subj.covariates);
        debug_assert_eq!(row.len(), p);
        let eta: f64 = row.iter().zip(&theta).map(|(r, t)| r * t).sum();
        let z = if subj.outcome == 1 {
            sample_truncnorm_above(rng, eta, 0.0)
        } else {
            sample_truncnorm_below(rng, eta, 0.0)
        };
        state.z[i] = z;
        for a in 0..p {
            rhs[a] += row[a] * z;
            for c in a..p {
                gram[(c, a)] += row[a] * row[c];
            }
        }
    }
    let ridge = 1.0 / (priors.omega * priors.omega);
    for a in 0..p {
        gram[(a, a)] += ridge;
    }
    let chol = gram
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("outcome-coefficient precision"))?;
    let mean = chol.solve(&rhs);
    let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let dev = chol
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or(Error::NotPositiveDefinite("outcome-coefficient factor"))?;
    for a in 0..p {
        let value = mean[a] + dev[a];
        if a < n_alpha {
            state.global.alpha[a] = value;
        } else {
            state.global.gamma[a - n_alpha] = value;
        }
    }
    Ok(())
}
