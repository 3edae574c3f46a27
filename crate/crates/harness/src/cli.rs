//! The `grail` command line. Exit codes: 0 success, 1 configuration or
//! argument error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use grail_core::bank::{load_bank, save_bank, PolicyBank, TrainedPolicy};
use grail_core::envs::{Domain, ReachSpec};
use grail_core::io::read_jsonl;
use grail_core::recognizer::{infer_goal, observe_prefix};
use grail_core::rng::derive_stream;
use grail_core::scoring::MetricKind;
use grail_core::types::EnvKind;

use crate::config::ExperimentConfig;
use crate::experiment::{generate_demos, run_experiment, seed_dir, train_banks, write_demos, write_goal_demos};
use crate::heatmap::export_visit_heatmap;
use crate::report::report;

#[derive(Debug, Parser)]
#[command(name = "grail", version, about = "Goal recognition with per-goal policy banks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate and split demonstrations for every seed.
    GenDemos {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train and save one bank per learner for every seed.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score one trajectory prefix against a saved bank and print the report as JSON.
    Infer {
        #[arg(long)]
        bank: PathBuf,
        /// JSONL trajectory file.
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        fraction: f64,
        /// mse, kl or w1.
        #[arg(long, default_value = "mse")]
        metric: String,
        /// Line of the trajectory file to use.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Seed for sampled metrics.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Experiment config supplying the environment geometry.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the full evaluation grid and render the report.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render tables from an existing results directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Export visit counts of a saved Q-learning bank.
    Heatmap {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config(path: &PathBuf) -> std::result::Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(Failure::Config)
}

fn runtime<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

/// Environment geometry for a bank: from the config when given, otherwise
/// from the grid stored in the policies or the default reach task.
fn bank_domain(bank: &PolicyBank, cfg: Option<&ExperimentConfig>) -> Domain {
    if let Some(cfg) = cfg {
        return cfg.domain();
    }
    match bank.entries.first().map(|e| &e.policy) {
        Some(TrainedPolicy::Tabular(p)) => Domain::Grid(p.grid.clone()),
        Some(TrainedPolicy::Q(p)) => Domain::Grid(p.grid.clone()),
        _ => Domain::Reach(ReachSpec::default()),
    }
}

fn execute(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::GenDemos { config: path } => {
            let cfg = config(&path)?;
            for seed in 0..cfg.seeds {
                let (train, test) = runtime(generate_demos(&cfg, seed))?;
                let dir = seed_dir(&cfg, seed).join("demos");
                runtime(write_demos(&dir, &train, &test))?;
                for path in runtime(write_goal_demos(&cfg, &dir, seed, &train, &test))? {
                    println!("{}", path.display());
                }
            }
        }
        Command::Train { config: path } => {
            let cfg = config(&path)?;
            for seed in 0..cfg.seeds {
                let (train, _) = runtime(generate_demos(&cfg, seed))?;
                let counter = grail_core::envs::InteractionCounter::new();
                for bank in runtime(train_banks(&cfg, seed, &train, &counter))? {
                    let dir = seed_dir(&cfg, seed).join("banks").join(bank.learner.as_str());
                    runtime(save_bank(&bank, &dir).map_err(Into::into))?;
                    println!(
                        "{}\t{:.2}s\t{} env steps",
                        dir.display(),
                        bank.total_train_seconds(),
                        bank.total_env_calls()
                    );
                }
            }
        }
        Command::Infer { bank, traj, fraction, metric, index, seed, config: cfg_path } => {
            let metric: MetricKind = metric.parse().map_err(|e: grail_core::Error| Failure::Config(e.into()))?;
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Failure::Config(anyhow::anyhow!("fraction {fraction} outside (0, 1]")));
            }
            let cfg = cfg_path.as_ref().map(config).transpose()?;
            let bank = runtime(load_bank(&bank).with_context(|| format!("loading bank {}", bank.display())))?;
            let trajs = runtime(read_jsonl(&traj).with_context(|| format!("reading {}", traj.display())))?;
            let t = runtime(trajs.get(index).with_context(|| format!("{} has no trajectory {index}", traj.display())))?;
            let domain = bank_domain(&bank, cfg.as_ref());
            if domain.kind() != bank.env || t.env != bank.env {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "trajectory ({}) and bank ({}) belong to different environments",
                    t.env,
                    bank.env
                )));
            }
            let prefix = runtime(observe_prefix(t, &domain, fraction).map_err(Into::into))?;
            let report = runtime(infer_goal(&prefix, &bank, &metric, &derive_stream(seed, "infer")).map_err(Into::into))?;
            println!("{}", runtime(serde_json::to_string(&report).map_err(Into::into))?);
        }
        Command::Eval { config: path } => {
            let cfg = config(&path)?;
            let outcome = runtime(run_experiment(&cfg))?;
            for (seed, cause) in &outcome.failures {
                eprintln!("seed {seed} failed: {cause}");
            }
            let table = runtime(report(&outcome.out_dir))?;
            print!("{}", table.to_text());
        }
        Command::Report { dir } => {
            let table = runtime(report(&dir))?;
            print!("{}", table.to_text());
        }
        Command::Heatmap { bank, out } => {
            let bank = runtime(load_bank(&bank).with_context(|| format!("loading bank {}", bank.display())))?;
            if bank.env != EnvKind::Grid {
                return Err(Failure::Runtime(anyhow::anyhow!("visit heatmaps need a grid bank")));
            }
            let rows = runtime(export_visit_heatmap(&bank, &out))?;
            println!("{} rows -> {}", rows.len(), out.display());
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> ExitCode {
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
