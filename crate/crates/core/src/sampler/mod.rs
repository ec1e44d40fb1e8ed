//! Metropolis-within-Gibbs engine: sweep schedule, burn-in adaptation,
//! multi-chain driver, and draw storage.
//!
//! Sweep order per iteration: one blocked draw of (β0, every bᵢ) with the
//! intercept drawn from its coefficient-marginal conditional, a
//! level-recentering move, every log σ²_b, every log σ²_w, joint (ρᵢ, bᵢ)
//! blocks with ρ updated against the coefficient-marginal likelihood,
//! hyperparameters, and finally (z, α, γ). Random-walk step sizes adapt
//! toward 0.44 acceptance during burn-in only and stay frozen afterwards,
//! so the post-burn-in kernel is a fixed Markov transition. Chains are
//! seeded independently and the result is bit-reproducible for a given
//! seed and configuration.

pub mod kernels;
pub mod slice;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Prepared;
use crate::error::{Error, Result};
use crate::likelihood::{
    log_joint, GlobalParams, ParamState, PriorConfig, Scaling, SubjectParams,
};
use crate::math::{seeded_rng, stream};

pub use kernels::MhOutcome;

/// Chain lengths, seeding, and instrumentation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Initial random-walk step size for all Metropolis kernels.
    pub initial_step: f64,
    /// Adapt step sizes during burn-in.
    pub adapt: bool,
    /// Monitor per-subject variances and autocorrelations too.
    pub monitor_subject_params: bool,
    /// Retain up to this many full-state snapshots per chain (0 = none);
    /// needed for posterior predictive checks.
    pub collect_states: usize,
    /// Verify that every accepted Metropolis move changes the joint
    /// log-density by exactly the accepted increment. Expensive; tests only.
    pub debug_checks: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 3,
            iterations: 8000,
            burnin: 4000,
            thin: 1,
            seed: 1,
            initial_step: 0.5,
            adapt: true,
            monitor_subject_params: false,
            collect_states: 0,
            debug_checks: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        if self.burnin >= self.iterations {
            return Err(Error::Config(format!(
                "burnin ({}) must be smaller than iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        Ok(())
    }

    pub fn kept_per_chain(&self) -> usize {
        (self.iterations - self.burnin).div_ceil(self.thin)
    }
}

/// A full-state snapshot retained for posterior predictive checking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub beta0: f64,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub subjects: Vec<SubjectParams>,
}

impl StateSnapshot {
    fn from_state(state: &ParamState) -> Self {
        Self {
            beta0: state.global.beta0,
            alpha: state.global.alpha.clone(),
            gamma: state.global.gamma.clone(),
            subjects: state.subjects.clone(),
        }
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone)]
pub struct ChainDraws {
    pub chain: usize,
    pub names: Vec<String>,
    /// kept-iteration rows, one value per monitored parameter.
    pub rows: Vec<Vec<f64>>,
    /// Realized post-burn-in acceptance rate per kernel family.
    pub acceptance: BTreeMap<String, f64>,
    pub states: Vec<StateSnapshot>,
}

impl ChainDraws {
    /// Column of one monitored parameter.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }
}

/// Draws from all chains of one fit.
#[derive(Debug, Clone)]
pub struct MultiChainDraws {
    pub chains: Vec<ChainDraws>,
}

impl MultiChainDraws {
    pub fn names(&self) -> &[String] {
        &self.chains[0].names
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| n == name)
    }

    /// Per-chain draw vectors of one parameter.
    pub fn per_chain(&self, idx: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.column(idx)).collect()
    }

    /// All post-burn-in states, chain-major.
    pub fn pooled_states(&self) -> Vec<&StateSnapshot> {
        self.chains.iter().flat_map(|c| c.states.iter()).collect()
    }

    /// Mean post-burn-in acceptance per kernel family across chains.
    pub fn acceptance(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for c in &self.chains {
            for (k, v) in &c.acceptance {
                let e = out.entry(k.clone()).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        out.into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect()
    }
}

/// Monitored-parameter names in draw order.
pub fn monitor_names(prepared: &Prepared, monitor_subject_params: bool) -> Vec<String> {
    let k = prepared.n_regimes();
    let mut names = vec!["beta0".to_string()];
    for a in 1..=(1 + 2 * k) {
        names.push(format!("alpha_{a}"));
    }
    for g in 1..=prepared.n_covariates {
        names.push(format!("gamma_{g}"));
    }
    for stat in ["v_b", "psi_b", "v_w", "psi_w"] {
        for r in &prepared.regime_names {
            names.push(format!("{stat}_{r}"));
        }
    }
    if monitor_subject_params {
        for subj in &prepared.subjects {
            for r in &prepared.regime_names {
                names.push(format!("log_sigma2_b_{}_{r}", subj.id));
            }
            for r in &prepared.regime_names {
                names.push(format!("log_sigma2_w_{}_{r}", subj.id));
            }
            names.push(format!("rho_{}", subj.id));
        }
    }
    names
}

fn record_row(state: &ParamState, monitor_subject_params: bool, out: &mut Vec<f64>) {
    out.clear();
    let g = &state.global;
    out.push(g.beta0);
    out.extend_from_slice(&g.alpha);
    out.extend_from_slice(&g.gamma);
    out.extend_from_slice(&g.v_b);
    out.extend_from_slice(&g.psi_b);
    out.extend_from_slice(&g.v_w);
    out.extend_from_slice(&g.psi_w);
    if monitor_subject_params {
        for sp in &state.subjects {
            out.extend_from_slice(&sp.log_sigma2_b);
            out.extend_from_slice(&sp.log_sigma2_w);
            out.push(sp.rho);
        }
    }
}

/// Deterministic, data-scaled starting state.
pub fn init_state(prepared: &Prepared, _priors: &PriorConfig) -> ParamState {
    let k = prepared.n_regimes();
    let n_subjects = prepared.subjects.len();

    let mut total = 0.0;
    let mut count = 0usize;
    let mut subject_means = Vec::with_capacity(n_subjects);
    for subj in &prepared.subjects {
        let s: f64 = subj.values.iter().sum();
        total += s;
        count += subj.len();
        subject_means.push(s / subj.len() as f64);
    }
    let beta0 = total / count.max(1) as f64;

    // Across-subject variance of subject means, as a long-term scale guess.
    let lsb0 = if n_subjects >= 2 {
        let m = subject_means.iter().sum::<f64>() / n_subjects as f64;
        let var = subject_means
            .iter()
            .map(|x| (x - m) * (x - m))
            .sum::<f64>()
            / (n_subjects - 1) as f64;
        var.max(1e-8).ln()
    } else {
        0.0
    };

    let mut subjects = Vec::with_capacity(n_subjects);
    for subj in &prepared.subjects {
        // Per-regime mean squared successive difference / 2 estimates the
        // innovation variance.
        let mut ss = vec![0.0; k];
        let mut counts = vec![0.0; k];
        for j in 1..subj.len() {
            if subj.obs_regime[j] == subj.obs_regime[j - 1] {
                let d = subj.values[j] - subj.values[j - 1];
                ss[subj.obs_regime[j]] += d * d;
                counts[subj.obs_regime[j]] += 1.0;
            }
        }
        let pooled = {
            let s: f64 = ss.iter().sum();
            let c: f64 = counts.iter().sum();
            if c > 0.0 {
                (s / c / 2.0).max(1e-8)
            } else {
                1.0
            }
        };
        let log_sigma2_w: Vec<f64> = (0..k)
            .map(|r| {
                if counts[r] > 0.0 {
                    (ss[r] / counts[r] / 2.0).max(1e-8).ln()
                } else {
                    pooled.ln()
                }
            })
            .collect();
        subjects.push(SubjectParams {
            b: vec![0.0; prepared.basis.basis_count()],
            log_sigma2_b: vec![lsb0; k],
            log_sigma2_w,
            rho: 0.9,
        });
    }

    let v_w: Vec<f64> = (0..k)
        .map(|r| subjects.iter().map(|s| s.log_sigma2_w[r]).sum::<f64>() / n_subjects as f64)
        .collect();

    ParamState {
        global: GlobalParams {
            beta0,
            v_b: vec![lsb0; k],
            psi_b: vec![1.0; k],
            v_w,
            psi_w: vec![1.0; k],
            alpha: vec![0.0; 1 + 2 * k],
            gamma: vec![0.0; prepared.n_covariates],
        },
        subjects,
        z: vec![0.0; n_subjects],
    }
}

#[derive(Clone, Default)]
struct Tally {
    proposals: u64,
    accepted: u64,
}

impl Tally {
    fn push(&mut self, outcome: &MhOutcome) {
        self.proposals += 1;
        self.accepted += u64::from(outcome.accepted);
    }

    fn rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// How one sweep should behave.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepMode {
    /// Robbins–Monro gain for step adaptation; `None` freezes step sizes.
    pub adapt_gain: Option<f64>,
    /// Accumulate acceptance tallies.
    pub tally: bool,
    /// Verify Metropolis increments against the joint density (expensive).
    pub debug_checks: bool,
}

/// One full Gibbs sweep with persistent scratch buffers and step sizes;
/// [`run_chain`] drives it, and custom drivers (calibration loops,
/// sweep-level experiments) can too.
pub struct GibbsSweeper {
    spline_fit: Vec<Vec<f64>>,
    spline_scratch: Vec<kernels::SplineScratch>,
    rho_scratch: (kernels::SplineScratch, kernels::SplineScratch),
    ss_w: Vec<f64>,
    n_w: Vec<f64>,
    step_lsb: Vec<Vec<f64>>,
    step_lsw: Vec<Vec<f64>>,
    step_rho: Vec<f64>,
    row_buf: Vec<f64>,
    tally_lsb: Tally,
    tally_lsw: Tally,
    tally_rho: Tally,
}

impl GibbsSweeper {
    pub fn new(prepared: &Prepared, initial_step: f64) -> Self {
        let k = prepared.n_regimes();
        let n = prepared.subjects.len();
        Self {
            spline_fit: prepared
                .subjects
                .iter()
                .map(|s| vec![0.0; s.len()])
                .collect(),
            spline_scratch: prepared
                .subjects
                .iter()
                .map(|s| kernels::SplineScratch::new(s, prepared.basis.basis_count()))
                .collect(),
            rho_scratch: {
                let bw = prepared
                    .subjects
                    .iter()
                    .map(kernels::whitened_bandwidth)
                    .max()
                    .unwrap_or(0);
                let l = prepared.basis.basis_count();
                (
                    kernels::SplineScratch::with_bandwidth(bw, l),
                    kernels::SplineScratch::with_bandwidth(bw, l),
                )
            },
            ss_w: vec![0.0; k],
            n_w: vec![0.0; k],
            step_lsb: vec![vec![initial_step; k]; n],
            step_lsw: vec![vec![initial_step; k]; n],
            step_rho: vec![initial_step; n],
            row_buf: Vec::new(),
            tally_lsb: Tally::default(),
            tally_lsw: Tally::default(),
            tally_rho: Tally::default(),
        }
    }

    fn refresh_fit(&mut self, prepared: &Prepared, state: &ParamState, subject: usize) {
        let subj = &prepared.subjects[subject];
        let sp = &state.subjects[subject];
        let fit = &mut self.spline_fit[subject];
        for j in 0..subj.len() {
            fit[j] = subj.rows[j].dot(&sp.b);
        }
    }

    /// Post-burn-in acceptance rates per kernel family.
    pub fn acceptance(&self) -> BTreeMap<String, f64> {
        let mut acceptance = BTreeMap::new();
        acceptance.insert("sigma_b".to_string(), self.tally_lsb.rate());
        acceptance.insert("sigma_w".to_string(), self.tally_lsw.rate());
        acceptance.insert("rho".to_string(), self.tally_rho.rate());
        acceptance
    }

    /// Run one full sweep in place.
    pub fn sweep(
        &mut self,
        prepared: &Prepared,
        state: &mut ParamState,
        priors: &PriorConfig,
        scaling: &Scaling,
        mode: SweepMode,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<()> {
        let k = prepared.n_regimes();
        let mut debug_joint = if mode.debug_checks {
            Some(log_joint(prepared, state, priors, scaling))
        } else {
            None
        };

        kernels::update_level_block(
            prepared,
            state,
            priors,
            &mut self.spline_fit,
            &mut self.spline_scratch,
            rng,
        )?;
        kernels::recenter_level(prepared, state, priors, &mut self.spline_fit, rng);
        if mode.debug_checks {
            debug_joint = Some(log_joint(prepared, state, priors, scaling));
        }

        for i in 0..prepared.subjects.len() {
            for r in 0..k {
                let before = debug_joint.unwrap_or(0.0);
                let outcome = kernels::update_log_sigma2_b(
                    &prepared.subjects[i],
                    &mut state.subjects[i],
                    r,
                    &state.global,
                    scaling,
                    self.step_lsb[i][r],
                    rng,
                );
                if mode.debug_checks {
                    debug_joint = Some(check_increment(
                        prepared, state, priors, scaling, before, &outcome, "log_sigma2_b",
                    )?);
                }
                if let Some(gain) = mode.adapt_gain {
                    adapt_step(&mut self.step_lsb[i][r], &outcome, gain);
                }
                if mode.tally {
                    self.tally_lsb.push(&outcome);
                }
            }
        }

        for i in 0..prepared.subjects.len() {
            kernels::innovation_ss(
                &prepared.subjects[i],
                &state.subjects[i],
                state.global.beta0,
                &self.spline_fit[i],
                &mut self.ss_w,
                &mut self.n_w,
            );
            for r in 0..k {
                let before = debug_joint.unwrap_or(0.0);
                let outcome = kernels::update_log_sigma2_w(
                    &prepared.subjects[i],
                    &mut state.subjects[i],
                    r,
                    self.ss_w[r],
                    self.n_w[r],
                    &state.global,
                    scaling,
                    self.step_lsw[i][r],
                    rng,
                );
                if mode.debug_checks {
                    debug_joint = Some(check_increment(
                        prepared, state, priors, scaling, before, &outcome, "log_sigma2_w",
                    )?);
                }
                if let Some(gain) = mode.adapt_gain {
                    adapt_step(&mut self.step_lsw[i][r], &outcome, gain);
                }
                if mode.tally {
                    self.tally_lsw.push(&outcome);
                }
            }
        }

        for i in 0..prepared.subjects.len() {
            let outcome = kernels::update_rho_coef_block(
                &prepared.subjects[i],
                &mut state.subjects[i],
                state.global.beta0,
                &mut self.spline_fit[i],
                &mut self.rho_scratch.0,
                &mut self.rho_scratch.1,
                self.step_rho[i],
                rng,
            )?;
            if mode.debug_checks {
                // The block's accepted increment lives on the coefficient
                // marginal, so only finiteness of the joint is checked here.
                let after = log_joint(prepared, state, priors, scaling);
                if !after.is_finite() {
                    return Err(Error::NonFinite {
                        quantity: "log_joint",
                        detail: "after (rho, b) block".into(),
                    });
                }
                debug_joint = Some(after);
            }
            if let Some(gain) = mode.adapt_gain {
                adapt_step(&mut self.step_rho[i], &outcome, gain);
            }
            if mode.tally {
                self.tally_rho.push(&outcome);
            }
        }

        for r in 0..k {
            self.row_buf.clear();
            self.row_buf
                .extend(state.subjects.iter().map(|s| s.log_sigma2_b[r]));
            let (mut v, mut psi) = (state.global.v_b[r], state.global.psi_b[r]);
            kernels::update_hyper_pair(
                &self.row_buf,
                priors.m_b,
                priors.kappa_b,
                priors.tau_b,
                &mut v,
                &mut psi,
                rng,
            );
            state.global.v_b[r] = v;
            state.global.psi_b[r] = psi;

            self.row_buf.clear();
            self.row_buf
                .extend(state.subjects.iter().map(|s| s.log_sigma2_w[r]));
            let (mut v, mut psi) = (state.global.v_w[r], state.global.psi_w[r]);
            kernels::update_hyper_pair(
                &self.row_buf,
                priors.m_w,
                priors.kappa_w,
                priors.tau_w,
                &mut v,
                &mut psi,
                rng,
            );
            state.global.v_w[r] = v;
            state.global.psi_w[r] = psi;
        }

        kernels::update_outcome_coefs(prepared, state, priors, scaling, rng)?;
        if mode.debug_checks {
            for (&z, subj) in state.z.iter().zip(&prepared.subjects) {
                debug_assert_eq!(z > 0.0, subj.outcome == 1, "latent sign invariant");
            }
        }
        Ok(())
    }
}

/// Robbins–Monro gain at burn-in iteration `t`.
fn adapt_gain(t: usize) -> f64 {
    1.0 / (1.0 + t as f64).powf(0.6)
}

fn adapt_step(step: &mut f64, outcome: &MhOutcome, gain: f64) {
    const TARGET: f64 = 0.44;
    let log_step = step.ln() + gain * (outcome.acc_prob - TARGET);
    *step = log_step.exp().clamp(1e-4, 50.0);
}

/// Verify that an accepted Metropolis move changed the joint log-density by
/// exactly the accepted increment.
fn check_increment(
    prepared: &Prepared,
    state: &ParamState,
    priors: &PriorConfig,
    scaling: &Scaling,
    before: f64,
    outcome: &MhOutcome,
    what: &str,
) -> Result<f64> {
    let after = log_joint(prepared, state, priors, scaling);
    if outcome.accepted {
        let expected = outcome.state_delta;
        let observed = after - before;
        let scale = 1.0 + before.abs().max(after.abs());
        if (observed - expected).abs() > 1e-8 * scale {
            return Err(Error::NonFinite {
                quantity: "metropolis increment",
                detail: format!(
                    "{what}: joint moved by {observed}, kernel reported {expected}"
                ),
            });
        }
    } else if (after - before).abs() > 1e-10 * (1.0 + before.abs()) {
        return Err(Error::NonFinite {
            quantity: "metropolis increment",
            detail: format!("{what}: rejected move changed the joint density"),
        });
    }
    Ok(after)
}

/// Run one chain; deterministic in (config.seed, chain_index).
pub fn run_chain(
    prepared: &Prepared,
    priors: &PriorConfig,
    scaling: &Scaling,
    config: &SamplerConfig,
    chain_index: usize,
) -> Result<ChainDraws> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed, &[stream::CHAIN, chain_index as u64]);
    let mut state = init_state(prepared, priors);
    let mut sweeper = GibbsSweeper::new(prepared, config.initial_step);
    for i in 0..prepared.subjects.len() {
        sweeper.refresh_fit(prepared, &state, i);
    }

    let names = monitor_names(prepared, config.monitor_subject_params);
    let kept = config.kept_per_chain();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(kept);
    let mut states: Vec<StateSnapshot> = Vec::new();
    let state_stride = if config.collect_states > 0 {
        kept.div_ceil(config.collect_states)
    } else {
        0
    };

    for iter in 0..config.iterations {
        let post_burnin = iter >= config.burnin;
        let mode = SweepMode {
            adapt_gain: (config.adapt && !post_burnin).then(|| adapt_gain(iter)),
            tally: post_burnin,
            debug_checks: config.debug_checks,
        };
        sweeper.sweep(prepared, &mut state, priors, scaling, mode, &mut rng)?;

        if post_burnin && (iter - config.burnin) % config.thin == 0 {
            let mut row = Vec::with_capacity(names.len());
            record_row(&state, config.monitor_subject_params, &mut row);
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    quantity: "monitored draw",
                    detail: format!("chain {chain_index}, iteration {iter}"),
                });
            }
            let kept_index = rows.len();
            rows.push(row);
            if state_stride > 0 && kept_index % state_stride == 0 {
                states.push(StateSnapshot::from_state(&state));
            }
        }
    }

    let final_joint = log_joint(prepared, &state, priors, scaling);
    if !final_joint.is_finite() {
        return Err(Error::NonFinite {
            quantity: "log_joint",
            detail: format!("chain {chain_index} final state: {final_joint}"),
        });
    }

    Ok(ChainDraws {
        chain: chain_index,
        names,
        rows,
        acceptance: sweeper.acceptance(),
        states,
    })
}

/// Run all chains (in parallel when a rayon pool is available); the result
/// is identical regardless of the parallel schedule.
pub fn run_chains(
    prepared: &Prepared,
    priors: &PriorConfig,
    scaling: &Scaling,
    config: &SamplerConfig,
) -> Result<MultiChainDraws> {
    config.validate()?;
    let chains: Result<Vec<ChainDraws>> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(prepared, priors, scaling, config, c))
        .collect();
    Ok(MultiChainDraws { chains: chains? })
}
