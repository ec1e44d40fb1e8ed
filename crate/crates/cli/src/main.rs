//! Command-line front end: simulate data, fit the joint model, run
//! replicate studies, compare against the two-stage baseline, and run
//! posterior predictive checks.
//!
//! Option precedence: command-line flags > `--config` file > defaults.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use varjoint::config::{RunConfig, Scale};
use varjoint::runner;
use varjoint::simulate::FitMethod;

/// Environment variable holding the default worker count.
const WORKERS_ENV: &str = "VARJOINT_WORKERS";

#[derive(Parser)]
#[command(
    name = "varjoint",
    about = "Joint Bayesian modeling of biomarker variability and binary outcomes",
    version
)]
struct Cli {
    /// TOML configuration file (defaults apply for anything unset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for chains and replicates
    /// (default: VARJOINT_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitterArg {
    Joint,
    TwoStage,
}

#[derive(Args)]
struct StudyArgs {
    /// Built-in simulation setting (1 = low, 2 = high measurement error).
    #[arg(long)]
    setting: Option<u8>,

    /// Problem-size preset.
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,

    /// Number of replicates.
    #[arg(long)]
    replicates: Option<usize>,

    /// Number of subjects.
    #[arg(long)]
    n_subjects: Option<usize>,

    /// Observations per subject.
    #[arg(long)]
    n_obs: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Long-format CSV: subject_id,time,value[,period].
    #[arg(long)]
    data: PathBuf,

    /// Outcome CSV: subject_id,outcome[,z1,z2,...].
    #[arg(long)]
    outcomes: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a configured truth.
    Simulate {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Fit the joint model to a dataset.
    Fit {
        #[command(flatten)]
        data: DataArgs,

        /// Number of chains.
        #[arg(long)]
        chains: Option<usize>,

        /// Iterations per chain.
        #[arg(long)]
        iterations: Option<usize>,

        /// Burn-in iterations per chain.
        #[arg(long)]
        burnin: Option<usize>,

        /// Do not exit nonzero when a monitored R-hat reaches 1.1.
        #[arg(long)]
        no_strict: bool,

        /// Skip writing the retained-states file.
        #[arg(long)]
        no_states: bool,
    },
    /// Replicate study of one fitter against the configured truth.
    SimStudy {
        #[command(flatten)]
        study: StudyArgs,

        /// Which fitter to study.
        #[arg(long, value_enum, default_value = "joint")]
        fitter: FitterArg,
    },
    /// Side-by-side replicate study: joint model vs two-stage baseline.
    Compare {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Posterior predictive checks from a fit's retained states.
    Ppc {
        #[command(flatten)]
        data: DataArgs,

        /// states.json written by `fit`.
        #[arg(long)]
        states: PathBuf,

        /// Posterior draws to replicate from.
        #[arg(long, default_value_t = 500)]
        n_rep: usize,
    },
}

fn apply_study_args(cfg: &mut RunConfig, args: &StudyArgs) {
    if let Some(s) = args.setting {
        cfg.study.setting = s;
    }
    if let Some(scale) = args.scale {
        cfg.study.scale = match scale {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        };
    }
    if let Some(r) = args.replicates {
        cfg.study.replicates = Some(r);
    }
    if let Some(n) = args.n_subjects {
        cfg.study.n_subjects = Some(n);
    }
    if let Some(n) = args.n_obs {
        cfg.study.n_obs = Some(n);
    }
}

fn init_workers(explicit: Option<usize>) -> Result<()> {
    let workers = explicit.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("worker pool initialization")?;
    }
    Ok(())
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    init_workers(cli.workers)?;

    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_toml_path(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    let out_dir = &cli.out_dir;

    match &cli.command {
        Command::Simulate { study } => {
            apply_study_args(&mut cfg, study);
            let manifest = runner::cmd_simulate(&cfg, out_dir)?;
            println!(
                "simulate: wrote {} file(s) to {}",
                manifest.files.len(),
                out_dir.display()
            );
        }
        Command::Fit {
            data,
            chains,
            iterations,
            burnin,
            no_strict,
            no_states,
        } => {
            if let Some(c) = chains {
                cfg.sampler.chains = *c;
            }
            if let Some(i) = iterations {
                cfg.sampler.iterations = *i;
            }
            if let Some(b) = burnin {
                cfg.sampler.burnin = *b;
            }
            let outcome = runner::cmd_fit(
                &cfg,
                &data.data,
                data.outcomes.as_deref(),
                out_dir,
                !no_states,
            )?;
            println!(
                "fit: rhat_max = {:.4}; wrote {} file(s) to {}",
                outcome.rhat_max,
                outcome.manifest.files.len(),
                out_dir.display()
            );
            if !outcome.rhat_ok && !no_strict {
                eprintln!(
                    "fit: a monitored R-hat reached {}; failing (use --no-strict to override)",
                    runner::RHAT_STRICT_LIMIT
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::SimStudy { study, fitter } => {
            apply_study_args(&mut cfg, study);
            let method = match fitter {
                FitterArg::Joint => FitMethod::Joint,
                FitterArg::TwoStage => FitMethod::TwoStage,
            };
            let manifest = runner::cmd_sim_study(&cfg, method, out_dir)?;
            println!(
                "sim-study ({}): wrote study_report.csv to {} ({} note(s))",
                method.label(),
                out_dir.display(),
                manifest.notes.len()
            );
        }
        Command::Compare { study } => {
            apply_study_args(&mut cfg, study);
            let manifest = runner::cmd_compare(&cfg, out_dir)?;
            println!(
                "compare: wrote compare_report.csv to {} ({} note(s))",
                out_dir.display(),
                manifest.notes.len()
            );
        }
        Command::Ppc { data, states, n_rep } => {
            let manifest = runner::cmd_ppc(
                &cfg,
                &data.data,
                data.outcomes.as_deref(),
                states,
                *n_rep,
                out_dir,
            )?;
            println!(
                "ppc: wrote {} file(s) to {}",
                manifest.files.len(),
                out_dir.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
