//! Experiment configuration, read from TOML.
//!
//! Every field has a default, so an empty file describes the two-goal grid
//! with biased demonstrations, behavioral cloning and MSE scoring over 10
//! seeds. See `configs/` for annotated examples.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use grail_core::demogen::{optimal_plan, BiasSpec, GridRegime, NoiseKind, NoiseSpec, TurnInsertionSpec};
use grail_core::envs::{Domain, GridGoal, GridSpec, ReachSpec};
use grail_core::learners::{LearnerHyper, LearnerKind};
use grail_core::scoring::{KlDirection, MetricKind};
use grail_core::types::{EnvKind, GoalId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalPreset {
    Grid2,
    Grid4,
    Grid6,
    Reach4,
}

impl GoalPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            GoalPreset::Grid2 => "grid2",
            GoalPreset::Grid4 => "grid4",
            GoalPreset::Grid6 => "grid6",
            GoalPreset::Reach4 => "reach4",
        }
    }

    pub fn env(self) -> EnvKind {
        match self {
            GoalPreset::Reach4 => EnvKind::Reach,
            _ => EnvKind::Grid,
        }
    }

    /// Goal ids in index order.
    pub fn goals(self, reach: &ReachSpec) -> Vec<GoalId> {
        const GRID: [(i32, i32); 6] = [(7, 1), (7, 7), (7, 3), (7, 5), (5, 1), (5, 7)];
        let n = match self {
            GoalPreset::Grid2 => 2,
            GoalPreset::Grid4 => 4,
            GoalPreset::Grid6 => 6,
            GoalPreset::Reach4 => {
                return (0..reach.goals.len())
                    .map(|i| GoalId::new(i, ReachSpec::goal_label(i)))
                    .collect()
            }
        };
        GRID[..n]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| GoalId::new(i, GridGoal::new(x, y).label()))
            .collect()
    }
}

/// Demonstrator behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regime {
    /// Shortest plans (grid) or the noiseless proportional expert (reach).
    Optimal,
    /// Grid only. Without `bias`, each goal gets its default preference.
    Biased {
        #[serde(default)]
        bias: Option<BiasSpec>,
    },
    /// Grid only: detours inserted with probability `p`.
    Suboptimal {
        #[serde(default = "default_insertion")]
        p: f64,
    },
    /// Reach only: additive action noise.
    Noise { noise: NoiseKind, level: f64 },
}

fn default_insertion() -> f64 {
    TurnInsertionSpec::default().p
}

impl Regime {
    /// Short tag for result files.
    pub fn label(&self) -> String {
        match self {
            Regime::Optimal => "optimal".into(),
            Regime::Biased { bias: None } => "biased".into(),
            Regime::Biased { bias: Some(b) } => {
                let name = serde_json::to_string(b).unwrap_or_default();
                format!("biased({})", name.trim_matches('"'))
            }
            Regime::Suboptimal { p } => format!("suboptimal(p={p})"),
            Regime::Noise { noise, level } => format!(
                "{}({level})",
                match noise {
                    NoiseKind::Gaussian => "gaussian",
                    NoiseKind::Uniform => "uniform",
                }
            ),
        }
    }

    pub fn grid(&self) -> Result<GridRegime> {
        Ok(match *self {
            Regime::Optimal => GridRegime::Optimal,
            Regime::Biased { bias } => GridRegime::Biased { bias },
            Regime::Suboptimal { p } => GridRegime::Suboptimal {
                insertion: TurnInsertionSpec { p },
            },
            Regime::Noise { .. } => bail!("action-noise regimes apply to the reach task only"),
        })
    }

    pub fn reach(&self) -> Result<Option<NoiseSpec>> {
        match *self {
            Regime::Optimal => Ok(None),
            Regime::Noise { noise, level } => Ok(Some(NoiseSpec { kind: noise, level })),
            _ => bail!("regime {} applies to the grid only", self.label()),
        }
    }
}

/// Metric parameters shared by every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    /// Pseudo-policy smoothing for `kl`.
    pub kl_eps: f64,
    /// `policy_observed` = KL(pi_g || pi_O); `observed_policy` swaps the arguments.
    pub kl_direction: KlDirection,
    /// Policy samples per step for continuous `w1`.
    pub w1_samples: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            kl_eps: MetricKind::DEFAULT_KL_EPS,
            kl_direction: KlDirection::PolicyObserved,
            w1_samples: MetricKind::DEFAULT_W1_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// grid2, grid4, grid6 or reach4; also fixes the environment.
    pub goals: GoalPreset,
    pub regime: Regime,
    /// Any of bc, gail, airl, qlearn, ppo.
    pub learners: Vec<LearnerKind>,
    /// Any of mse, kl, w1. `kl` is skipped for the reach task.
    pub metrics: Vec<String>,
    /// Observability fractions in (0, 1].
    pub fractions: Vec<f64>,
    pub demos_per_goal: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Number of seeds; seed `k` runs with master seed `master_seed + k`.
    pub seeds: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Train per-goal policies on the rayon pool. Results do not change.
    pub parallel: bool,
    /// Keep every trained bank under `out_dir/seed_k/banks/`.
    pub save_banks: bool,
    pub grid: GridSpec,
    pub reach: ReachSpec,
    pub scoring: ScoringConfig,
    pub hyper: LearnerHyper,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            goals: GoalPreset::Grid2,
            regime: Regime::Biased { bias: None },
            learners: vec![LearnerKind::Bc],
            metrics: vec!["mse".into()],
            fractions: vec![0.2, 0.3, 0.4],
            demos_per_goal: 10,
            n_train: 7,
            n_test: 3,
            seeds: 10,
            master_seed: 0,
            out_dir: PathBuf::from("results"),
            parallel: false,
            save_banks: false,
            grid: GridSpec::default(),
            reach: ReachSpec::default(),
            scoring: ScoringConfig::default(),
            hyper: LearnerHyper::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for the continuous task: 200 demonstrations per goal, 150/50.
    pub fn reach_defaults() -> Self {
        Self {
            goals: GoalPreset::Reach4,
            regime: Regime::Optimal,
            demos_per_goal: 200,
            n_train: 150,
            n_test: 50,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn domain(&self) -> Domain {
        match self.goals.env() {
            EnvKind::Grid => Domain::Grid(self.grid.clone()),
            EnvKind::Reach => Domain::Reach(self.reach.clone()),
        }
    }

    pub fn goal_ids(&self) -> Vec<GoalId> {
        self.goals.goals(&self.reach)
    }

    /// Parsed metrics with the configured parameters.
    pub fn metric_kinds(&self) -> Result<Vec<MetricKind>> {
        self.metrics
            .iter()
            .map(|m| {
                Ok(match m.parse::<MetricKind>()? {
                    MetricKind::NegMse => MetricKind::NegMse,
                    MetricKind::NegKl { .. } => MetricKind::NegKl {
                        eps: self.scoring.kl_eps,
                        direction: self.scoring.kl_direction,
                    },
                    MetricKind::NegW1 { .. } => MetricKind::NegW1 {
                        samples: self.scoring.w1_samples,
                    },
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.learners.is_empty(), "no learners selected");
        ensure!(!self.fractions.is_empty(), "no observability fractions");
        for f in &self.fractions {
            ensure!(*f > 0.0 && *f <= 1.0, "fraction {f} outside (0, 1]");
        }
        ensure!(self.seeds >= 1, "seeds must be >= 1");
        ensure!(
            self.n_train + self.n_test == self.demos_per_goal,
            "n_train ({}) + n_test ({}) must equal demos_per_goal ({})",
            self.n_train,
            self.n_test,
            self.demos_per_goal
        );
        ensure!(self.n_train >= 1 && self.n_test >= 1, "train and test splits must be non-empty");
        let metrics = self.metric_kinds()?;
        ensure!(!metrics.is_empty(), "no metrics selected");
        ensure!(
            self.scoring.kl_eps > 0.0 && self.scoring.kl_eps < 0.25,
            "kl_eps {} must lie in (0, 1/4)",
            self.scoring.kl_eps
        );
        ensure!(self.scoring.w1_samples >= 1, "w1_samples must be >= 1");
        self.hyper.validate()?;
        match self.goals.env() {
            EnvKind::Grid => {
                self.regime.grid()?;
                for g in self.goal_ids() {
                    let goal = GridGoal::parse(&g.label)?;
                    optimal_plan(&self.grid, self.grid.start, goal).with_context(|| format!("goal {}", g.label))?;
                }
            }
            EnvKind::Reach => {
                self.regime.reach()?;
                self.reach.validate()?;
            }
        }
        Ok(())
    }
}
