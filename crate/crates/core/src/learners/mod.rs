//! Per-goal policy learners.
//!
//! Imitation learners ([`bc`], [`adversarial`]) consume demonstrations; the
//! reward-driven baselines ([`qlearn`], [`ppo`]) consume an environment with a
//! fixed goal. All of them work on index-level (grid) or vector-level (reach)
//! views, converted here from [`Trajectory`] values.

pub mod adversarial;
pub mod bc;
pub mod hyper;
pub mod pg;
pub mod ppo;
pub mod qlearn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::GridSpec;
use crate::types::Trajectory;
use crate::{Error, Result};

pub use hyper::{AdversarialHyper, BcHyper, PgHyper, PpoHyper, QLearnHyper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Bc,
    Gail,
    Airl,
    Qlearn,
    Ppo,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::Bc,
        LearnerKind::Gail,
        LearnerKind::Airl,
        LearnerKind::Qlearn,
        LearnerKind::Ppo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Bc => "bc",
            LearnerKind::Gail => "gail",
            LearnerKind::Airl => "airl",
            LearnerKind::Qlearn => "qlearn",
            LearnerKind::Ppo => "ppo",
        }
    }

    /// Learns from demonstrations rather than from environment reward.
    pub fn uses_demos(self) -> bool {
        matches!(self, LearnerKind::Bc | LearnerKind::Gail | LearnerKind::Airl)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown learner {s:?}")))
    }
}

/// Hyperparameters for every learner, as one config block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerHyper {
    pub bc: BcHyper,
    pub gail: AdversarialHyper,
    pub airl: AdversarialHyper,
    pub qlearn: QLearnHyper,
    pub ppo: PpoHyper,
}

impl LearnerHyper {
    pub fn validate(&self) -> Result<()> {
        self.bc.validate()?;
        self.gail.validate()?;
        self.airl.validate()?;
        self.qlearn.validate()?;
        self.ppo.validate()
    }
}

/// `(state index, action code)` pairs, one list per trajectory.
pub fn grid_pairs(grid: &GridSpec, demos: &[Trajectory]) -> Result<Vec<Vec<(usize, usize)>>> {
    demos
        .iter()
        .map(|t| {
            t.steps
                .iter()
                .map(|s| {
                    let g = s.state.as_grid()?;
                    if !grid.is_valid(&g) {
                        return Err(Error::InvalidState(format!("{g:?} is not a free grid state")));
                    }
                    Ok((grid.index(&g), s.action.as_discrete()?.code()))
                })
                .collect()
        })
        .collect()
}

/// `(position, action)` pairs, one list per trajectory.
pub fn reach_pairs(demos: &[Trajectory]) -> Result<Vec<Vec<(Vec<f64>, Vec<f64>)>>> {
    demos
        .iter()
        .map(|t| {
            t.steps
                .iter()
                .map(|s| Ok((s.state.as_reach()?.p.to_vec(), s.action.as_continuous()?.0.to_vec())))
                .collect()
        })
        .collect()
}

pub(crate) fn check_finite(learner: &'static str, stage: &'static str, index: usize, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            learner,
            stage,
            index,
            reason: "non-finite parameters".into(),
        })
    }
}
