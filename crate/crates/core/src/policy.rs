//! Trained policies and the common query interface used for scoring.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use tinynn::Mlp;

use crate::envs::GridSpec;
use crate::types::{softmax, ActionDistribution, DiscreteAction, EnvKind, State};
use crate::{Error, Result};

/// A goal-directed policy `pi_g(a | s)`.
pub trait Policy: Send + Sync {
    fn distribution(&self, state: &State) -> Result<ActionDistribution>;

    /// Domain whose states and actions this policy handles.
    fn env_kind(&self) -> EnvKind;
}

/// Tabular grid policy with a uniform default for unseen states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub grid: GridSpec,
    /// `num_states * 4` probabilities, row-major by state index.
    pub probs: Vec<f64>,
    pub seen: Vec<bool>,
}

impl TabularPolicy {
    pub fn uniform(grid: &GridSpec) -> Self {
        let n = grid.num_states();
        Self {
            grid: grid.clone(),
            probs: vec![1.0 / DiscreteAction::COUNT as f64; n * DiscreteAction::COUNT],
            seen: vec![false; n],
        }
    }

    /// Policy whose every row is `softmax(logits[row])`.
    pub fn from_logits(grid: &GridSpec, logits: &[f64]) -> Result<Self> {
        let n = grid.num_states();
        if logits.len() != n * DiscreteAction::COUNT {
            return Err(Error::InvalidParameter(format!(
                "expected {} logits, got {}",
                n * DiscreteAction::COUNT,
                logits.len()
            )));
        }
        let probs = logits
            .chunks(DiscreteAction::COUNT)
            .flat_map(|row| softmax(row, 1.0))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            probs,
            seen: vec![true; n],
        })
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.probs[index * DiscreteAction::COUNT..(index + 1) * DiscreteAction::COUNT]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.probs[index * DiscreteAction::COUNT..(index + 1) * DiscreteAction::COUNT]
    }
}

fn grid_index(grid: &GridSpec, state: &State) -> Result<usize> {
    let s = state.as_grid()?;
    if !grid.is_valid(&s) {
        return Err(Error::InvalidState(format!("{s:?} is not a free grid state")));
    }
    Ok(grid.index(&s))
}

impl Policy for TabularPolicy {
    fn distribution(&self, state: &State) -> Result<ActionDistribution> {
        let i = grid_index(&self.grid, state)?;
        Ok(ActionDistribution::Discrete(self.row(i).to_vec()))
    }

    fn env_kind(&self) -> EnvKind {
        EnvKind::Grid
    }
}

/// Q-values and visit counts per `(state, action)`, row-major by state index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub q: Vec<f64>,
    pub visits: Vec<u64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            q: vec![0.0; num_states * num_actions],
            visits: vec![0; num_states * num_actions],
        }
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    /// Visits of one state summed over actions.
    pub fn state_visits(&self, state: usize, num_actions: usize) -> u64 {
        self.visits[state * num_actions..(state + 1) * num_actions].iter().sum()
    }
}

/// Boltzmann policy over a grid Q-table: `pi(a|s) ∝ exp(Q(s,a) / temperature)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolicy {
    pub grid: GridSpec,
    pub table: QTable,
    pub temperature: f64,
}

impl Policy for QPolicy {
    fn distribution(&self, state: &State) -> Result<ActionDistribution> {
        let i = grid_index(&self.grid, state)?;
        let n = DiscreteAction::COUNT;
        ActionDistribution::softmax(&self.table.q[i * n..(i + 1) * n], self.temperature)
    }

    fn env_kind(&self) -> EnvKind {
        EnvKind::Grid
    }
}

/// Diagonal Gaussian policy for the reach task.
///
/// The network sees `obs_scale * p`; the distribution mean is the network
/// output clipped to `[-1, 1]` and the scale is `exp(log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMlpPolicy {
    pub mean_net: Mlp,
    pub log_scale: Vec<f64>,
    pub obs_scale: f64,
}

impl GaussianMlpPolicy {
    pub fn features(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| v * self.obs_scale).collect()
    }

    /// Unclipped network output for a raw observation.
    pub fn raw_mean(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean_net.forward(&self.features(p))?)
    }

    pub fn scale(&self) -> Vec<f64> {
        self.log_scale.iter().map(|l| l.exp()).collect()
    }
}

impl Policy for GaussianMlpPolicy {
    fn distribution(&self, state: &State) -> Result<ActionDistribution> {
        let p = state.as_reach()?.p;
        let mean = self.raw_mean(&p)?.into_iter().map(|m| m.clamp(-1.0, 1.0)).collect();
        ActionDistribution::gaussian(mean, self.scale())
    }

    fn env_kind(&self) -> EnvKind {
        EnvKind::Reach
    }
}

/// Counts every [`Policy::distribution`] call made through it.
pub struct CountingPolicy<'a> {
    inner: &'a dyn Policy,
    calls: AtomicU64,
}

impl<'a> CountingPolicy<'a> {
    pub fn new(inner: &'a dyn Policy) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Policy for CountingPolicy<'_> {
    fn distribution(&self, state: &State) -> Result<ActionDistribution> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.distribution(state)
    }

    fn env_kind(&self) -> EnvKind {
        self.inner.env_kind()
    }
}
