//! Command implementations behind the CLI: each writes its declared files
//! into an output directory and returns a manifest describing the run.
//!
//! Outputs carry no timestamps or machine identifiers, so identical
//! invocations with the same seed and configuration produce byte-identical
//! files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{load_long_csv, save_long_csv, save_outcome_csv, Dataset, LoadReport};
use crate::diagnostics::{summarize_all, write_summary_csv};
use crate::error::{Error, Result};
use crate::math::{seeded_rng, stream};
use crate::ppc::{
    ppc_longitudinal, ppc_outcome, write_ppc_longitudinal_csv, write_ppc_outcome_csv,
};
use crate::sampler::{run_chains, MultiChainDraws, StateSnapshot};
use crate::simulate::{
    generate, run_study, write_study_csv, CoefSummary, FitMethod, SimDraws, StudyReport,
};

/// Number of full-state snapshots retained by a fit for later checks.
pub const DEFAULT_STATES: usize = 500;

/// Threshold on the convergence diagnostic used by strict mode.
pub const RHAT_STRICT_LIMIT: f64 = 1.1;

/// What a command produced; serialized to `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rates: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhat_max: Option<f64>,
    pub notes: Vec<String>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.sampler.seed,
            files: Vec::new(),
            acceptance_rates: None,
            rhat_max: None,
            notes: Vec::new(),
        }
    }

    fn add_file(&mut self, path: &Path) {
        self.files
            .push(path.file_name().unwrap().to_string_lossy().into_owned());
    }

    fn write(&mut self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        self.files.push("manifest.json".to_string());
        let mut file = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut file, self)
            .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
        writeln!(file)?;
        Ok(path)
    }
}

fn ensure_dir(out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    Ok(())
}

fn hash_comment(cfg: &RunConfig) -> String {
    format!("config_hash={}", cfg.hash())
}

fn note_load_report(manifest: &mut Manifest, report: &LoadReport) {
    for (id, reason) in &report.rejected {
        manifest.notes.push(format!("rejected subject {id}: {reason}"));
    }
    manifest.notes.extend(report.warnings.iter().cloned());
}

/// Generate one dataset from the configured truth and write it out.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    ensure_dir(out_dir)?;
    let truth = cfg.resolved_truth()?;
    let (dataset, draws) = generate(&truth, cfg.sampler.seed, 0)?;
    let comment = hash_comment(cfg);

    let long = out_dir.join("data_long.csv");
    save_long_csv(&long, &dataset.subjects, Some(&comment))?;
    let outcomes = out_dir.join("data_outcome.csv");
    save_outcome_csv(&outcomes, &dataset.subjects, Some(&comment))?;

    #[derive(Serialize)]
    struct TruthManifest<'a> {
        config_hash: String,
        truth: &'a crate::simulate::SimTruth,
        draws: &'a SimDraws,
    }
    let truth_path = out_dir.join("truth.json");
    let mut file = std::fs::File::create(&truth_path)?;
    serde_json::to_writer_pretty(
        &mut file,
        &TruthManifest {
            config_hash: cfg.hash(),
            truth: &truth,
            draws: &draws,
        },
    )
    .map_err(|e| Error::Data(format!("truth serialization: {e}")))?;
    writeln!(file)?;

    let mut manifest = Manifest::new("simulate", cfg);
    manifest.add_file(&long);
    manifest.add_file(&outcomes);
    manifest.add_file(&truth_path);
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Result of a fit run, for exit-code decisions.
#[derive(Debug)]
pub struct FitOutcome {
    pub manifest: Manifest,
    pub rhat_max: f64,
    /// False when any monitored parameter reaches the strict R̂ limit.
    pub rhat_ok: bool,
}

fn load_dataset(
    cfg: &RunConfig,
    long: &Path,
    outcomes: Option<&Path>,
) -> Result<(Dataset, LoadReport)> {
    load_long_csv(long, outcomes, &cfg.columns, &cfg.data)
}

fn write_draws_csv(path: &Path, draws: &MultiChainDraws, comment: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# {comment}")?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(draws.names().iter().cloned());
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for chain in &draws.chains {
        for (idx, row) in chain.rows.iter().enumerate() {
            record.clear();
            record.push(chain.chain.to_string());
            record.push(idx.to_string());
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StatesFile {
    config_hash: String,
    states: Vec<StateSnapshot>,
}

fn write_states_json(path: &Path, draws: &MultiChainDraws, cfg: &RunConfig) -> Result<()> {
    let states: Vec<StateSnapshot> = draws
        .chains
        .iter()
        .flat_map(|c| c.states.iter().cloned())
        .collect();
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer(
        &mut file,
        &StatesFile {
            config_hash: cfg.hash(),
            states,
        },
    )
    .map_err(|e| Error::Data(format!("states serialization: {e}")))?;
    writeln!(file)?;
    Ok(())
}

fn read_states_json(path: &Path) -> Result<Vec<StateSnapshot>> {
    let file = std::fs::File::open(path)?;
    let parsed: StatesFile = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(parsed.states)
}

/// Fit the joint model to a dataset on disk; writes draws, summaries,
/// retained states, and the manifest.
pub fn cmd_fit(
    cfg: &RunConfig,
    long: &Path,
    outcomes: Option<&Path>,
    out_dir: &Path,
    keep_states: bool,
) -> Result<FitOutcome> {
    ensure_dir(out_dir)?;
    let (dataset, report) = load_dataset(cfg, long, outcomes)?;
    let prepared = dataset.prepare()?;

    let mut sampler_cfg = cfg.sampler.clone();
    if keep_states && sampler_cfg.collect_states == 0 {
        sampler_cfg.collect_states = DEFAULT_STATES.div_ceil(sampler_cfg.chains);
    }
    if !keep_states {
        sampler_cfg.collect_states = 0;
    }
    let draws = run_chains(&prepared, &cfg.priors, &cfg.scaling, &sampler_cfg)?;
    let comment = hash_comment(cfg);

    let draws_path = out_dir.join("draws.csv");
    write_draws_csv(&draws_path, &draws, &comment)?;

    let summaries = summarize_all(&draws)?;
    let summary_path = out_dir.join("summary.csv");
    write_summary_csv(&summary_path, &summaries, Some(&comment))?;
    let rhat_max = summaries
        .iter()
        .map(|s| s.rhat)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut manifest = Manifest::new("fit", cfg);
    manifest.add_file(&draws_path);
    manifest.add_file(&summary_path);
    if keep_states {
        let states_path = out_dir.join("states.json");
        write_states_json(&states_path, &draws, cfg)?;
        manifest.add_file(&states_path);
    }
    note_load_report(&mut manifest, &report);
    manifest.acceptance_rates = Some(draws.acceptance());
    manifest.rhat_max = Some(rhat_max);
    let rhat_ok = rhat_max < RHAT_STRICT_LIMIT;
    if !rhat_ok {
        manifest
            .notes
            .push(format!("rhat_max {rhat_max} reaches the strict limit {RHAT_STRICT_LIMIT}"));
    }
    manifest.write(out_dir)?;
    Ok(FitOutcome {
        manifest,
        rhat_max,
        rhat_ok,
    })
}

fn study_to_manifest(manifest: &mut Manifest, report: &StudyReport) {
    for (r, reason) in &report.failures {
        manifest.notes.push(format!("replicate {r} excluded: {reason}"));
    }
    let finite_rhats: Vec<f64> = report
        .max_rhats
        .iter()
        .copied()
        .filter(|r| r.is_finite())
        .collect();
    if !finite_rhats.is_empty() {
        manifest.rhat_max = Some(finite_rhats.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)));
    }
}

/// Run the replicate study with one fitter.
pub fn cmd_sim_study(cfg: &RunConfig, method: FitMethod, out_dir: &Path) -> Result<Manifest> {
    ensure_dir(out_dir)?;
    let truth = cfg.resolved_truth()?;
    let replicates = cfg.study_replicates();
    let sampler_cfg = cfg.study_sampler();
    let report = run_study(
        &truth,
        replicates,
        method,
        &cfg.priors,
        &sampler_cfg,
        cfg.sampler.seed,
    )?;
    let path = out_dir.join("study_report.csv");
    write_study_csv(
        &path,
        &report.coefficients,
        report.replicates_used,
        report.failures.len(),
        Some(&hash_comment(cfg)),
    )?;
    let mut manifest = Manifest::new("sim-study", cfg);
    manifest.add_file(&path);
    study_to_manifest(&mut manifest, &report);
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Run both fitters on the same generated replicates and write the
/// side-by-side comparison.
pub fn cmd_compare(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    ensure_dir(out_dir)?;
    let truth = cfg.resolved_truth()?;
    let replicates = cfg.study_replicates();
    let sampler_cfg = cfg.study_sampler();
    let joint = run_study(
        &truth,
        replicates,
        FitMethod::Joint,
        &cfg.priors,
        &sampler_cfg,
        cfg.sampler.seed,
    )?;
    let twostage = run_study(
        &truth,
        replicates,
        FitMethod::TwoStage,
        &cfg.priors,
        &sampler_cfg,
        cfg.sampler.seed,
    )?;

    // Interleave per coefficient: joint row, then two-stage row.
    let mut rows: Vec<CoefSummary> = Vec::new();
    for (j, t) in joint.coefficients.iter().zip(&twostage.coefficients) {
        rows.push(j.clone());
        rows.push(t.clone());
    }
    let path = out_dir.join("compare_report.csv");
    write_study_csv(
        &path,
        &rows,
        joint.replicates_used.min(twostage.replicates_used),
        joint.failures.len() + twostage.failures.len(),
        Some(&hash_comment(cfg)),
    )?;
    let mut manifest = Manifest::new("compare", cfg);
    manifest.add_file(&path);
    study_to_manifest(&mut manifest, &joint);
    for (r, reason) in &twostage.failures {
        manifest
            .notes
            .push(format!("two-stage replicate {r} excluded: {reason}"));
    }
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Posterior predictive checks from a fit's retained states.
pub fn cmd_ppc(
    cfg: &RunConfig,
    long: &Path,
    outcomes: Option<&Path>,
    states_path: &Path,
    n_rep: usize,
    out_dir: &Path,
) -> Result<Manifest> {
    ensure_dir(out_dir)?;
    let (dataset, report) = load_dataset(cfg, long, outcomes)?;
    let prepared = dataset.prepare()?;
    let states = read_states_json(states_path)?;
    if states.is_empty() {
        return Err(Error::Data("states file holds no draws".into()));
    }
    for (idx, s) in states.iter().enumerate() {
        if s.subjects.len() != prepared.subjects.len() {
            return Err(Error::Data(format!(
                "state {idx} holds {} subjects, dataset has {}",
                s.subjects.len(),
                prepared.subjects.len()
            )));
        }
    }
    let refs: Vec<&StateSnapshot> = states.iter().collect();
    let mut manifest = Manifest::new("ppc", cfg);
    if refs.len() < n_rep {
        manifest.notes.push(format!(
            "requested {n_rep} replicated draws, only {} retained states available; using all",
            refs.len()
        ));
    }

    let mut rng = seeded_rng(cfg.sampler.seed, &[stream::PPC]);
    let pvals = ppc_longitudinal(&prepared, &refs, n_rep, &mut rng)?;
    let (p_outcome, t_obs) = ppc_outcome(&prepared, &refs, n_rep, &cfg.scaling, &mut rng)?;

    let comment = hash_comment(cfg);
    let long_path = out_dir.join("ppc_longitudinal.csv");
    write_ppc_longitudinal_csv(&long_path, &prepared, &pvals, Some(&comment))?;
    let outcome_path = out_dir.join("ppc_outcome.csv");
    write_ppc_outcome_csv(&outcome_path, p_outcome, t_obs, Some(&comment))?;

    manifest.add_file(&long_path);
    manifest.add_file(&outcome_path);
    note_load_report(&mut manifest, &report);
    manifest.write(out_dir)?;
    Ok(manifest)
}
