//! Ground-truth data generation and the replicate-study harness.
//!
//! The generator mirrors the fitted model exactly: shared percentile-knot
//! basis on a uniform time grid, spline coefficients drawn per regime from
//! subject-level variances, AR(1) errors started at stationarity, and probit
//! outcomes driven by the log standard deviations.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_knots, BasisSpec};
use crate::data::{assign_coef_regimes, Dataset, LoadOptions, LoadReport, SubjectSeries};
use crate::diagnostics::summarize;
use crate::error::{Error, Result};
use crate::likelihood::{eta_linear, PriorConfig, Scaling, SubjectParams};
use crate::math::{norm_cdf, seeded_rng, stream};
use crate::sampler::{run_chains, SamplerConfig};
use crate::twostage;

/// Law of a log-variance: log σ² ~ N(mean, sd²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarLaw {
    pub mean: f64,
    pub sd: f64,
}

/// Experimental-period layout for regime-heterogeneous truths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSchedule {
    pub names: Vec<String>,
    /// Fraction of the time span each period occupies (sums to 1).
    pub fractions: Vec<f64>,
}

impl RegimeSchedule {
    /// The five-period stress-test layout: anticipation, break, stress,
    /// break, recovery with durations 10/5/10/5/5 minutes.
    pub fn tsst() -> Self {
        Self {
            names: ["p", "m1", "s", "m2", "r"].map(String::from).to_vec(),
            fractions: vec![10.0 / 35.0, 5.0 / 35.0, 10.0 / 35.0, 5.0 / 35.0, 5.0 / 35.0],
        }
    }

    fn label_for(&self, t: f64, span: f64) -> &str {
        let mut acc = 0.0;
        for (name, f) in self.names.iter().zip(&self.fractions) {
            acc += f * span;
            if t < acc {
                return name;
            }
        }
        self.names.last().unwrap()
    }
}

/// Complete generative truth for one simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimTruth {
    pub beta0: f64,
    /// Per-regime laws of log σ²_b.
    pub log_sigma2_b_law: Vec<VarLaw>,
    /// Per-regime laws of log σ²_w.
    pub log_sigma2_w_law: Vec<VarLaw>,
    pub rho: f64,
    /// Outcome coefficients (intercept, short-term terms, long-term terms).
    pub alpha: Vec<f64>,
    pub scaling: Scaling,
    pub n_subjects: usize,
    pub n_obs: usize,
    pub time_span: f64,
    pub percentile_step: f64,
    pub degree: usize,
    pub schedule: Option<RegimeSchedule>,
}

impl SimTruth {
    /// Low-measurement-error setting at full size.
    pub fn setting1() -> Self {
        Self {
            beta0: 81.083,
            log_sigma2_b_law: vec![VarLaw { mean: 5.0, sd: 1.0 }],
            log_sigma2_w_law: vec![VarLaw {
                mean: -3.8,
                sd: 0.75,
            }],
            rho: 0.998,
            alpha: vec![0.3, -1.0, 0.5],
            scaling: Scaling {
                sigma_w_multiplier: 10.0,
                sigma_b_divisor: 10.0,
            },
            n_subjects: 150,
            n_obs: 600,
            time_span: 600.0,
            percentile_step: 2.0,
            degree: 3,
            schedule: None,
        }
    }

    /// High-measurement-error setting: larger innovation scale, unscaled
    /// short-term predictor, different outcome coefficients.
    pub fn setting2() -> Self {
        Self {
            log_sigma2_w_law: vec![VarLaw { mean: 1.8, sd: 0.75 }],
            alpha: vec![-0.6, 1.0, -1.5],
            scaling: Scaling {
                sigma_w_multiplier: 1.0,
                sigma_b_divisor: 10.0,
            },
            ..Self::setting1()
        }
    }

    pub fn setting(which: u8) -> Result<Self> {
        match which {
            1 => Ok(Self::setting1()),
            2 => Ok(Self::setting2()),
            other => Err(Error::Config(format!("unknown setting {other}"))),
        }
    }

    /// Shrink to desk scale (50 subjects, 200 observations).
    pub fn desk(mut self) -> Self {
        self.n_subjects = 50;
        self.n_obs = 200;
        self
    }

    pub fn n_regimes(&self) -> usize {
        self.log_sigma2_w_law.len()
    }

    /// The uniform observation grid shared by all subjects.
    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.n_obs;
        (0..n)
            .map(|j| self.time_span * j as f64 / (n - 1).max(1) as f64)
            .collect()
    }

    pub fn build_basis(&self) -> Result<BasisSpec> {
        build_knots(&self.time_grid(), self.percentile_step, self.degree)
    }

    fn validate(&self) -> Result<()> {
        let k = self.n_regimes();
        if self.log_sigma2_b_law.len() != k {
            return Err(Error::Config(
                "log_sigma2_b_law and log_sigma2_w_law must list the same regimes".into(),
            ));
        }
        if self.alpha.len() != 1 + 2 * k {
            return Err(Error::Config(format!(
                "alpha must have {} entries for {k} regime(s), found {}",
                1 + 2 * k,
                self.alpha.len()
            )));
        }
        if let Some(s) = &self.schedule {
            if s.names.len() != k || s.fractions.len() != k {
                return Err(Error::Config(
                    "schedule must name one period per regime".into(),
                ));
            }
        } else if k != 1 {
            return Err(Error::Config(
                "multi-regime truth requires a schedule".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must be in (0,1), got {}", self.rho)));
        }
        if self.n_subjects < 2 || self.n_obs < self.degree + 2 {
            return Err(Error::Config("simulation size too small".into()));
        }
        Ok(())
    }
}

/// Per-subject parameter draws used by a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimDraws {
    /// [subject][regime] σ²_b.
    pub sigma2_b: Vec<Vec<f64>>,
    /// [subject][regime] σ²_w.
    pub sigma2_w: Vec<Vec<f64>>,
    /// [subject][basis] spline coefficients.
    pub b: Vec<Vec<f64>>,
}

/// Generate the longitudinal half of a dataset; outcomes are absent.
pub fn gen_longitudinal(
    truth: &SimTruth,
    basis: &BasisSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<SubjectSeries>, SimDraws)> {
    truth.validate()?;
    let times = truth.time_grid();
    let periods: Option<Vec<String>> = truth.schedule.as_ref().map(|s| {
        times
            .iter()
            .map(|&t| s.label_for(t, truth.time_span).to_string())
            .collect()
    });
    let obs_regime: Vec<usize> = match (&truth.schedule, &periods) {
        (Some(s), Some(p)) => p
            .iter()
            .map(|lab| s.names.iter().position(|n| n == lab).unwrap())
            .collect(),
        _ => vec![0; times.len()],
    };
    let coef_regime = assign_coef_regimes(basis, &times, &obs_regime);

    let mut subjects = Vec::with_capacity(truth.n_subjects);
    let mut sigma2_b = Vec::with_capacity(truth.n_subjects);
    let mut sigma2_w = Vec::with_capacity(truth.n_subjects);
    let mut b_draws = Vec::with_capacity(truth.n_subjects);
    let width = (truth.n_subjects as f64).log10().ceil().max(1.0) as usize;
    for i in 0..truth.n_subjects {
        let s2b: Vec<f64> = truth
            .log_sigma2_b_law
            .iter()
            .map(|law| (law.mean + law.sd * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        let s2w: Vec<f64> = truth
            .log_sigma2_w_law
            .iter()
            .map(|law| (law.mean + law.sd * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();

        let b: Vec<f64> = coef_regime
            .iter()
            .map(|&r| s2b[r].sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();

        // AR(1) errors from the stationary start of the first regime.
        let rho = truth.rho;
        let stationary_sd = (s2w[obs_regime[0]] / ((1.0 - rho) * (1.0 + rho))).sqrt();
        let mut e = stationary_sd * rng.sample::<f64, _>(StandardNormal);
        let mut values = Vec::with_capacity(times.len());
        for (j, &t) in times.iter().enumerate() {
            let w = s2w[obs_regime[j]].sqrt() * rng.sample::<f64, _>(StandardNormal);
            e = rho * e + w;
            let fit = truth.beta0 + basis.design_row(t)?.dot(&b);
            values.push(fit + e);
        }

        subjects.push(SubjectSeries {
            id: format!("s{i:0width$}"),
            times: times.clone(),
            values,
            periods: periods.clone(),
            outcome: None,
            covariates: vec![],
        });
        sigma2_b.push(s2b);
        sigma2_w.push(s2w);
        b_draws.push(b);
    }
    Ok((
        subjects,
        SimDraws {
            sigma2_b,
            sigma2_w,
            b: b_draws,
        },
    ))
}

/// Bernoulli outcomes through the probit link on the drawn variances.
pub fn gen_outcome(truth: &SimTruth, draws: &SimDraws, rng: &mut ChaCha8Rng) -> Vec<u8> {
    draws
        .sigma2_b
        .iter()
        .zip(&draws.sigma2_w)
        .map(|(s2b, s2w)| {
            let sp = SubjectParams {
                b: vec![],
                log_sigma2_b: s2b.iter().map(|v| v.ln()).collect(),
                log_sigma2_w: s2w.iter().map(|v| v.ln()).collect(),
                rho: truth.rho,
            };
            let eta = eta_linear(&sp, &truth.scaling, &truth.alpha, &[], &[]);
            u8::from(rng.random::<f64>() < norm_cdf(eta))
        })
        .collect()
}

/// Generate a complete dataset (longitudinal + outcomes) for one replicate.
pub fn generate(truth: &SimTruth, seed: u64, replicate: u64) -> Result<(Dataset, SimDraws)> {
    let mut rng = seeded_rng(seed, &[stream::GENERATE, replicate]);
    let basis = truth.build_basis()?;
    let (mut subjects, draws) = gen_longitudinal(truth, &basis, &mut rng)?;
    let outcomes = gen_outcome(truth, &draws, &mut rng);
    for (s, y) in subjects.iter_mut().zip(outcomes) {
        s.outcome = Some(y);
    }
    let opts = LoadOptions {
        percentile_step: truth.percentile_step,
        degree: truth.degree,
        min_obs: 2,
        use_periods: truth.schedule.is_some(),
    };
    let dataset = Dataset::build(subjects, &opts, &mut LoadReport::default())?;
    Ok((dataset, draws))
}

/// Which fitter the study harness runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Joint,
    TwoStage,
}

impl FitMethod {
    pub fn label(&self) -> &'static str {
        match self {
            FitMethod::Joint => "joint",
            FitMethod::TwoStage => "two-stage",
        }
    }
}

/// One replicate's interval estimates for the outcome coefficients.
#[derive(Debug, Clone)]
pub struct ReplicateEstimate {
    pub estimate: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Largest R̂ across monitored parameters (NaN for the two-stage fit).
    pub max_rhat: f64,
}

/// Study-level aggregate for one coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefSummary {
    pub parameter: String,
    pub true_value: f64,
    pub model: String,
    /// Coverage in percent.
    pub coverage: f64,
    /// Average interval length.
    pub ail: f64,
    pub bias: f64,
    pub rmse: f64,
}

/// Replicate-study result: per-coefficient criteria plus bookkeeping.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub coefficients: Vec<CoefSummary>,
    pub replicates_used: usize,
    /// (replicate index, reason) for every excluded replicate.
    pub failures: Vec<(usize, String)>,
    /// Per successful replicate, the largest monitored R̂ (joint fits).
    pub max_rhats: Vec<f64>,
}

/// The four criteria, computed exactly as defined: coverage is the fraction
/// of replicates whose interval contains the truth, bias the mean estimate
/// error, ail the mean interval width, rmse the root mean squared error.
pub fn aggregate(
    truth_alpha: &[f64],
    model: &str,
    estimates: &[ReplicateEstimate],
) -> Vec<CoefSummary> {
    let r = estimates.len() as f64;
    truth_alpha
        .iter()
        .enumerate()
        .map(|(a, &truth)| {
            let covered = estimates
                .iter()
                .filter(|e| e.lo[a] <= truth && truth <= e.hi[a])
                .count() as f64;
            let bias = estimates.iter().map(|e| e.estimate[a] - truth).sum::<f64>() / r;
            let ail = estimates.iter().map(|e| e.hi[a] - e.lo[a]).sum::<f64>() / r;
            let rmse = (estimates
                .iter()
                .map(|e| (e.estimate[a] - truth) * (e.estimate[a] - truth))
                .sum::<f64>()
                / r)
                .sqrt();
            CoefSummary {
                parameter: format!("alpha_{}", a + 1),
                true_value: truth,
                model: model.to_string(),
                coverage: 100.0 * covered / r,
                ail,
                bias,
                rmse,
            }
        })
        .collect()
}

/// Fit one generated dataset with the joint model and extract the outcome
/// coefficients' posterior summaries.
pub fn fit_joint_replicate(
    dataset: &Dataset,
    priors: &PriorConfig,
    scaling: &Scaling,
    sampler: &SamplerConfig,
) -> Result<ReplicateEstimate> {
    let prepared = dataset.prepare()?;
    let draws = run_chains(&prepared, priors, scaling, sampler)?;
    let names = draws.names().to_vec();
    let n_alpha = 1 + 2 * prepared.n_regimes();
    let mut estimate = Vec::with_capacity(n_alpha);
    let mut lo = Vec::with_capacity(n_alpha);
    let mut hi = Vec::with_capacity(n_alpha);
    let mut max_rhat: f64 = 0.0;
    for (idx, name) in names.iter().enumerate() {
        let summary = summarize(name, &draws.per_chain(idx))?;
        max_rhat = max_rhat.max(summary.rhat);
        if name.starts_with("alpha_") {
            estimate.push(summary.mean);
            lo.push(summary.q025);
            hi.push(summary.q975);
        }
    }
    Ok(ReplicateEstimate {
        estimate,
        lo,
        hi,
        max_rhat,
    })
}

/// Fit one generated dataset with the two-stage baseline.
pub fn fit_twostage_replicate(dataset: &Dataset, scaling: &Scaling) -> Result<ReplicateEstimate> {
    let prepared = dataset.prepare()?;
    let fit = twostage::stage1_fit(&prepared)?;
    let sigma2_b: Vec<f64> = (0..prepared.subjects.len())
        .map(|i| twostage::empirical_sigma2_b(&fit, i))
        .collect();
    let sigma2_w: Vec<f64> = (0..prepared.subjects.len())
        .map(|i| twostage::empirical_sigma2_w(&prepared, &fit, i))
        .collect();
    let rows = twostage::probit_design(&sigma2_b, &sigma2_w, scaling);
    let y: Vec<u8> = prepared.subjects.iter().map(|s| s.outcome).collect();
    let probit = twostage::stage2_probit(&y, &rows)?;
    let lo = probit
        .coefs
        .iter()
        .zip(&probit.se)
        .map(|(c, s)| c - 1.96 * s)
        .collect();
    let hi = probit
        .coefs
        .iter()
        .zip(&probit.se)
        .map(|(c, s)| c + 1.96 * s)
        .collect();
    Ok(ReplicateEstimate {
        estimate: probit.coefs,
        lo,
        hi,
        max_rhat: f64::NAN,
    })
}

/// Run `replicates` generate-and-fit cycles and aggregate the four criteria.
///
/// Replicates parallelize over a derived per-replicate seed, so results are
/// independent of worker count; failed replicates are excluded from the
/// aggregate and reported.
pub fn run_study(
    truth: &SimTruth,
    replicates: usize,
    method: FitMethod,
    priors: &PriorConfig,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<StudyReport> {
    truth.validate()?;
    let results: Vec<(usize, Result<ReplicateEstimate>)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let est = (|| {
                let (dataset, _) = generate(truth, seed, r as u64)?;
                match method {
                    FitMethod::Joint => {
                        let mut cfg = sampler.clone();
                        cfg.seed = crate::math::seeded_rng(seed, &[stream::STUDY, r as u64])
                            .random::<u64>();
                        fit_joint_replicate(&dataset, priors, &truth.scaling, &cfg)
                    }
                    FitMethod::TwoStage => fit_twostage_replicate(&dataset, &truth.scaling),
                }
            })();
            (r, est)
        })
        .collect();

    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    let mut max_rhats = Vec::new();
    for (r, res) in results {
        match res {
            Ok(est) => {
                max_rhats.push(est.max_rhat);
                estimates.push(est);
            }
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if estimates.is_empty() {
        return Err(Error::NonConvergence("every replicate failed".into()));
    }
    let coefficients = aggregate(&truth.alpha, method.label(), &estimates);
    Ok(StudyReport {
        coefficients,
        replicates_used: estimates.len(),
        failures,
        max_rhats,
    })
}

/// Write the study report CSV
/// (`parameter,true_value,model,coverage,ail,bias,rmse,...`).
pub fn write_study_csv(
    path: &Path,
    rows: &[CoefSummary],
    replicates_used: usize,
    failures: usize,
    comment: Option<&str>,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "parameter",
        "true_value",
        "model",
        "coverage",
        "ail",
        "bias",
        "rmse",
        "replicates_used",
        "replicates_failed",
    ])?;
    for row in rows {
        w.write_record([
            row.parameter.as_str(),
            &row.true_value.to_string(),
            &row.model.to_string(),
            &row.coverage.to_string(),
            &row.ail.to_string(),
            &row.bias.to_string(),
            &row.rmse.to_string(),
            &replicates_used.to_string(),
            &failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
