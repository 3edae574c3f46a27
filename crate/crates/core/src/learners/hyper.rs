use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Behavioral cloning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcHyper {
    /// Laplace pseudo-count for the tabular estimator.
    pub alpha: f64,
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub hidden: Vec<usize>,
    /// Multiplier applied to positions before they enter a network.
    pub obs_scale: f64,
    /// Lower bound on the fitted action scale.
    pub min_scale: f64,
}

impl Default for BcHyper {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            batch: 8,
            lr: 1e-3,
            epochs: 50,
            hidden: vec![64, 64],
            obs_scale: 5.0,
            min_scale: 1e-3,
        }
    }
}

/// Tabular Q-learning with epsilon-greedy exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLearnHyper {
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub episodes: usize,
    /// Boltzmann temperature of the derived policy.
    pub temperature: f64,
}

impl Default for QLearnHyper {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            gamma: 0.95,
            episodes: 20_000,
            temperature: 1.0,
        }
    }
}

/// Clipped-surrogate policy update shared by PPO, GAIL and AIRL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgHyper {
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Adam step size for network policies.
    pub lr: f64,
    /// Adam step size for tabular logits.
    pub table_lr: f64,
    /// Adam step size for the value network.
    pub value_lr: f64,
    /// Running-average step size for tabular values.
    pub table_value_lr: f64,
    pub hidden: Vec<usize>,
    pub obs_scale: f64,
    pub init_log_scale: f64,
    pub min_log_scale: f64,
    pub normalize_advantages: bool,
}

impl Default for PgHyper {
    fn default() -> Self {
        Self {
            clip: 0.2,
            epochs: 4,
            minibatch: 32,
            lr: 3e-4,
            table_lr: 0.02,
            value_lr: 1e-3,
            table_value_lr: 0.1,
            hidden: vec![64, 64],
            obs_scale: 5.0,
            init_log_scale: -0.5,
            min_log_scale: -5.0,
            normalize_advantages: true,
        }
    }
}

/// GAIL and AIRL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversarialHyper {
    pub rounds: usize,
    pub gamma: f64,
    /// Discriminator (or reward head) Adam step size.
    pub disc_lr: f64,
    pub disc_hidden: Vec<usize>,
    pub disc_updates_per_round: usize,
    pub replay_capacity: usize,
    /// Expert samples per discriminator step; the same number of policy samples is drawn.
    pub demo_batch: usize,
    pub pg: PgHyper,
}

impl Default for AdversarialHyper {
    fn default() -> Self {
        Self {
            rounds: 200,
            gamma: 0.95,
            disc_lr: 3e-3,
            disc_hidden: vec![64, 64],
            disc_updates_per_round: 16,
            replay_capacity: 512,
            demo_batch: 16,
            pg: PgHyper::default(),
        }
    }
}

/// PPO on the environment's own reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoHyper {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub gamma: f64,
    pub pg: PgHyper,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            iterations: 100,
            episodes_per_iteration: 8,
            gamma: 0.95,
            pg: PgHyper::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn discount(v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidParameter(format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

impl BcHyper {
    pub fn validate(&self) -> Result<()> {
        positive("bc.alpha", self.alpha)?;
        positive("bc.lr", self.lr)?;
        positive("bc.obs_scale", self.obs_scale)?;
        positive("bc.min_scale", self.min_scale)?;
        nonzero("bc.batch", self.batch)
    }
}

impl QLearnHyper {
    pub fn validate(&self) -> Result<()> {
        positive("qlearn.alpha", self.alpha)?;
        positive("qlearn.temperature", self.temperature)?;
        discount(self.gamma)?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("qlearn.epsilon {}", self.epsilon)));
        }
        Ok(())
    }
}

impl PgHyper {
    pub fn validate(&self) -> Result<()> {
        positive("clip", self.clip)?;
        positive("lr", self.lr)?;
        positive("table_lr", self.table_lr)?;
        positive("value_lr", self.value_lr)?;
        positive("table_value_lr", self.table_value_lr)?;
        positive("obs_scale", self.obs_scale)?;
        nonzero("minibatch", self.minibatch)
    }
}

impl AdversarialHyper {
    pub fn validate(&self) -> Result<()> {
        discount(self.gamma)?;
        positive("disc_lr", self.disc_lr)?;
        nonzero("replay_capacity", self.replay_capacity)?;
        nonzero("demo_batch", self.demo_batch)?;
        self.pg.validate()
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<()> {
        discount(self.gamma)?;
        nonzero("episodes_per_iteration", self.episodes_per_iteration)?;
        self.pg.validate()
    }
}
