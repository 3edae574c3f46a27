//! The evaluation grid: seeds x learners x metrics x observability fractions.
//!
//! Layout of `out_dir` after [`run_experiment`]:
//!
//! ```text
//! manifest.json      config, code version, per-seed status
//! raw.csv            one row per (seed, learner, metric, fraction), with timings
//! aggregated.csv     one row per (learner, metric, fraction), over seeds; no timings
//! predictions.csv    one row per test prefix
//! seed_<k>/          the same raw and prediction rows for seed k alone
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use grail_core::bank::{save_bank, train_bank, PolicyBank};
use grail_core::demogen::{gen_grid_demos, gen_reach_demos, split};
use grail_core::envs::InteractionCounter;
use grail_core::io::write_jsonl;
use grail_core::recognizer::{infer_goal_audited, observe_prefix};
use grail_core::rng::derive_stream;
use grail_core::scoring::MetricKind;
use grail_core::types::{DemoSet, EnvKind, GoalId, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::stats::{aggregate_stats, classification_metrics, StatSummary};

/// One (seed, learner, metric, fraction) cell. Column order is part of the
/// output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub env: String,
    pub regime: String,
    pub goals: String,
    pub learner: String,
    pub metric: String,
    pub fraction: f64,
    pub seed: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ties: usize,
    pub train_s: f64,
    pub infer_s: f64,
    pub env_calls_train: u64,
    pub env_calls_infer: u64,
}

/// Outcome for one observed prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub seed: usize,
    pub learner: String,
    pub metric: String,
    pub fraction: f64,
    pub trajectory: String,
    pub true_goal: String,
    pub predicted: String,
    pub tie: bool,
    pub prefix_length: usize,
    pub score_true: f64,
    pub score_predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: usize,
    pub rows: Vec<RunRow>,
    pub predictions: Vec<Prediction>,
}

/// Seed-level summary of one (learner, metric, fraction) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub env: String,
    pub regime: String,
    pub goals: String,
    pub learner: String,
    pub metric: String,
    pub fraction: f64,
    pub accuracy: StatSummary,
    pub precision: StatSummary,
    pub recall: StatSummary,
    pub f1: StatSummary,
    pub ties: usize,
    pub predictions: usize,
    pub env_calls_train: u64,
    pub env_calls_infer: u64,
}

pub const AGG_HEADER: [&str; 28] = [
    "env",
    "regime",
    "goals",
    "learner",
    "metric",
    "fraction",
    "n_seeds",
    "accuracy_mean",
    "accuracy_std",
    "accuracy_ci_low",
    "accuracy_ci_high",
    "precision_macro_mean",
    "precision_macro_std",
    "precision_macro_ci_low",
    "precision_macro_ci_high",
    "recall_macro_mean",
    "recall_macro_std",
    "recall_macro_ci_low",
    "recall_macro_ci_high",
    "f1_macro_mean",
    "f1_macro_std",
    "f1_macro_ci_low",
    "f1_macro_ci_high",
    "f1_micro_mean",
    "ties",
    "predictions",
    "env_calls_train",
    "env_calls_infer",
];

impl AggRow {
    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.env.clone(),
            self.regime.clone(),
            self.goals.clone(),
            self.learner.clone(),
            self.metric.clone(),
            self.fraction.to_string(),
            self.f1.n.to_string(),
        ];
        for s in [&self.accuracy, &self.precision, &self.recall, &self.f1] {
            r.extend([s.mean, s.std, s.ci_low, s.ci_high].map(|v| v.to_string()));
        }
        r.push(self.accuracy.mean.to_string());
        r.extend([self.ties, self.predictions].map(|v| v.to_string()));
        r.extend([self.env_calls_train, self.env_calls_infer].map(|v| v.to_string()));
        r
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<RunRow>,
    pub aggregated: Vec<AggRow>,
    pub failures: Vec<(usize, String)>,
}

impl ExperimentOutcome {
    pub fn find(&self, learner: &str, metric: &str, fraction: f64) -> Option<&AggRow> {
        self.aggregated
            .iter()
            .find(|r| r.learner == learner && r.metric == metric && r.fraction == fraction)
    }
}

pub fn seed_master(cfg: &ExperimentConfig, seed: usize) -> u64 {
    cfg.master_seed.wrapping_add(seed as u64)
}

/// Held-out demonstrations, labelled with their true goal.
pub type TestSet = Vec<(GoalId, Trajectory)>;

/// Demonstrations for one seed, split per goal into training and test sets.
pub fn generate_demos(cfg: &ExperimentConfig, seed: usize) -> Result<(DemoSet, TestSet)> {
    let master = seed_master(cfg, seed);
    let counter = InteractionCounter::new();
    let mut train = DemoSet::default();
    let mut test = Vec::new();
    for goal in cfg.goal_ids() {
        let mut rng = derive_stream(master, &format!("demos/{}", goal.label));
        let demos = match cfg.goals.env() {
            EnvKind::Grid => gen_grid_demos(&cfg.grid, &goal, cfg.regime.grid()?, cfg.demos_per_goal, &mut rng, &counter)?,
            EnvKind::Reach => gen_reach_demos(&cfg.reach, &goal, cfg.regime.reach()?, cfg.demos_per_goal, &mut rng, &counter)?,
        };
        let (tr, te) = split(demos, cfg.n_train)?;
        test.extend(te.into_iter().map(|t| (goal.clone(), t)));
        train.per_goal.push((goal, tr));
    }
    Ok((train, test))
}

pub fn seed_dir(cfg: &ExperimentConfig, seed: usize) -> PathBuf {
    cfg.out_dir.join(format!("seed_{seed}"))
}

/// Writes `train.jsonl` and `test.jsonl` for one seed.
pub fn write_demos(dir: &Path, train: &DemoSet, test: &TestSet) -> Result<()> {
    fs::create_dir_all(dir)?;
    let train: Vec<Trajectory> = train.per_goal.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    let test: Vec<Trajectory> = test.iter().map(|(_, t)| t.clone()).collect();
    write_jsonl(dir.join("train.jsonl"), &train)?;
    write_jsonl(dir.join("test.jsonl"), &test)?;
    Ok(())
}

/// One bank per configured learner, trained against `counter`.
pub fn train_banks(cfg: &ExperimentConfig, seed: usize, train: &DemoSet, counter: &InteractionCounter) -> Result<Vec<PolicyBank>> {
    let domain = cfg.domain();
    let goals = cfg.goal_ids();
    cfg.learners
        .iter()
        .map(|&kind| {
            let demos = kind.uses_demos().then_some(train);
            train_bank(&domain, &goals, demos, kind, &cfg.hyper, seed_master(cfg, seed), cfg.parallel, counter)
                .with_context(|| format!("training {kind} bank"))
        })
        .collect()
}

fn metric_applies(env: EnvKind, metric: &MetricKind) -> bool {
    !(env == EnvKind::Reach && matches!(metric, MetricKind::NegKl { .. }))
}

/// Writes one `{env}_{goal}_{regime}_{seed}.jsonl` per goal holding its
/// training then test demonstrations.
pub fn write_goal_demos(cfg: &ExperimentConfig, dir: &Path, seed: usize, train: &DemoSet, test: &TestSet) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let label = cfg.regime.label();
    let regime = label.split('(').next().unwrap_or(&label);
    let mut paths = Vec::new();
    for (goal, trajs) in &train.per_goal {
        let mut all = trajs.clone();
        all.extend(test.iter().filter(|(g, _)| g == goal).map(|(_, t)| t.clone()));
        let path = dir.join(format!("{}_{}_{regime}_{seed}.jsonl", cfg.goals.env(), goal.label));
        write_jsonl(&path, &all)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Generates, trains and evaluates one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: usize) -> Result<SeedOutcome> {
    let master = seed_master(cfg, seed);
    let domain = cfg.domain();
    let goals = cfg.goal_ids();
    let labels: Vec<&str> = goals.iter().map(|g| g.label.as_str()).collect();
    let metrics = cfg.metric_kinds()?;
    let (train, test) = generate_demos(cfg, seed)?;
    if cfg.save_banks {
        write_demos(&seed_dir(cfg, seed).join("demos"), &train, &test)?;
    }

    let counter = InteractionCounter::new();
    let banks = train_banks(cfg, seed, &train, &counter)?;
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for bank in &banks {
        let learner = bank.learner.as_str();
        if cfg.save_banks {
            save_bank(bank, seed_dir(cfg, seed).join("banks").join(learner))?;
        }
        if learner == "bc" && bank.total_env_calls() != 0 {
            bail!("behavioral cloning used {} environment steps", bank.total_env_calls());
        }
        for metric in metrics.iter().filter(|m| metric_applies(domain.kind(), m)) {
            for &fraction in &cfg.fractions {
                let started = Instant::now();
                let first = predictions.len();
                let mut ties = 0;
                let mut env_calls_infer = 0;
                for (i, (truth, traj)) in test.iter().enumerate() {
                    let prefix = observe_prefix(traj, &domain, fraction)?;
                    let key = format!("infer/{learner}/{}/{fraction}/{i}", metric.name());
                    let report = infer_goal_audited(&prefix, bank, metric, &derive_stream(master, &key), &counter)?;
                    env_calls_infer += report.env_calls;
                    ties += usize::from(report.tie);
                    predictions.push(Prediction {
                        seed,
                        learner: learner.into(),
                        metric: metric.name().into(),
                        fraction,
                        trajectory: format!("{}#{}", truth.label, i),
                        true_goal: truth.label.clone(),
                        predicted: report.chosen.label.clone(),
                        tie: report.tie,
                        prefix_length: report.prefix_length,
                        score_true: report.score_of(&truth.label).unwrap_or(f64::NAN),
                        score_predicted: report.score_of(&report.chosen.label).unwrap_or(f64::NAN),
                    });
                }
                let pairs: Vec<(&str, &str)> = predictions[first..]
                    .iter()
                    .map(|p| (p.true_goal.as_str(), p.predicted.as_str()))
                    .collect();
                let m = classification_metrics(&pairs, &labels)?;
                rows.push(RunRow {
                    env: domain.kind().as_str().into(),
                    regime: cfg.regime.label(),
                    goals: cfg.goals.as_str().into(),
                    learner: learner.into(),
                    metric: metric.name().into(),
                    fraction,
                    seed,
                    accuracy: m.accuracy,
                    precision: m.macro_precision,
                    recall: m.macro_recall,
                    f1: m.macro_f1,
                    ties,
                    train_s: bank.total_train_seconds(),
                    infer_s: started.elapsed().as_secs_f64(),
                    env_calls_train: bank.total_env_calls(),
                    env_calls_infer,
                });
            }
        }
    }
    Ok(SeedOutcome { seed, rows, predictions })
}

/// Groups rows by (learner, metric, fraction) in first-seen order.
pub fn aggregate(rows: &[RunRow], predictions_per_row: usize) -> Vec<AggRow> {
    let mut keys: Vec<(&str, &str, f64)> = Vec::new();
    for r in rows {
        let k = (r.learner.as_str(), r.metric.as_str(), r.fraction);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(learner, metric, fraction)| {
            let group: Vec<&RunRow> = rows
                .iter()
                .filter(|r| r.learner == learner && r.metric == metric && r.fraction == fraction)
                .collect();
            let stat = |f: fn(&RunRow) -> f64| aggregate_stats(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            AggRow {
                env: group[0].env.clone(),
                regime: group[0].regime.clone(),
                goals: group[0].goals.clone(),
                learner: learner.into(),
                metric: metric.into(),
                fraction,
                accuracy: stat(|r| r.accuracy),
                precision: stat(|r| r.precision),
                recall: stat(|r| r.recall),
                f1: stat(|r| r.f1),
                ties: group.iter().map(|r| r.ties).sum(),
                predictions: group.len() * predictions_per_row,
                env_calls_train: group.iter().map(|r| r.env_calls_train).sum(),
                env_calls_infer: group.iter().map(|r| r.env_calls_infer).sum(),
            }
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregated(path: &Path, rows: &[AggRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(AGG_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `seed_<k>/raw.csv` and `seed_<k>/predictions.csv`.
pub fn write_seed(cfg: &ExperimentConfig, outcome: &SeedOutcome) -> Result<()> {
    let dir = seed_dir(cfg, outcome.seed);
    fs::create_dir_all(&dir)?;
    write_rows(&dir.join("raw.csv"), &outcome.rows)?;
    write_rows(&dir.join("predictions.csv"), &outcome.predictions)
}

#[derive(Serialize)]
struct SeedStatus {
    seed: usize,
    master_seed: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    averaging: &'static str,
    metrics: Vec<String>,
    skipped_metrics: Vec<String>,
    config: &'a ExperimentConfig,
    seeds: Vec<SeedStatus>,
}

/// Runs every seed, writes the result files and returns the aggregate. A
/// failing seed is logged and left out; the call fails only if every seed does.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let run = |seed: usize| {
        let started = Instant::now();
        let out = run_seed(cfg, seed).and_then(|o| write_seed(cfg, &o).map(|_| o));
        match &out {
            Ok(_) => eprintln!("seed {seed}: done in {:.1}s", started.elapsed().as_secs_f64()),
            Err(e) => eprintln!("seed {seed}: failed: {e:#}"),
        }
        (seed, out)
    };
    let results: Vec<(usize, Result<SeedOutcome>)> = if cfg.parallel {
        (0..cfg.seeds).into_par_iter().map(run).collect()
    } else {
        (0..cfg.seeds).map(run).collect()
    };

    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    let mut statuses = Vec::new();
    for (seed, r) in results {
        let master_seed = seed_master(cfg, seed);
        match r {
            Ok(o) => {
                rows.extend(o.rows);
                predictions.extend(o.predictions);
                statuses.push(SeedStatus { seed, master_seed, status: "ok", error: None });
            }
            Err(e) => {
                let msg = format!("{e:#}");
                statuses.push(SeedStatus { seed, master_seed, status: "failed", error: Some(msg.clone()) });
                failures.push((seed, msg));
            }
        }
    }

    let metrics = cfg.metric_kinds()?;
    let env = cfg.goals.env();
    let manifest = Manifest {
        tool: "grail",
        version: env!("CARGO_PKG_VERSION"),
        averaging: "precision, recall and f1 are macro averages over goals; micro f1 equals accuracy",
        metrics: metrics.iter().filter(|m| metric_applies(env, m)).map(|m| m.to_string()).collect(),
        skipped_metrics: metrics.iter().filter(|m| !metric_applies(env, m)).map(|m| m.to_string()).collect(),
        config: cfg,
        seeds: statuses,
    };
    fs::write(cfg.out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    if rows.is_empty() {
        bail!("every seed failed; first cause: {}", failures.first().map(|f| f.1.as_str()).unwrap_or("none"));
    }

    let per_row = cfg.goal_ids().len() * cfg.n_test;
    let aggregated = aggregate(&rows, per_row);
    write_rows(&cfg.out_dir.join("raw.csv"), &rows)?;
    write_rows(&cfg.out_dir.join("predictions.csv"), &predictions)?;
    write_aggregated(&cfg.out_dir.join("aggregated.csv"), &aggregated)?;
    Ok(ExperimentOutcome {
        out_dir: cfg.out_dir.clone(),
        rows,
        aggregated,
        failures,
    })
}
