//! Goal recognition from demonstrations.
//!
//! One goal-directed policy is learned per candidate goal, either by
//! imitation (behavioral cloning, GAIL, AIRL) or from environment reward
//! (tabular Q-learning, PPO). A partially observed trajectory is then scored
//! against every policy in the resulting bank and the best-scoring goal is
//! returned. Inference never touches an environment.
//!
//! Module map:
//! - [`types`], [`rng`], [`io`]: shared domain types, seeded streams, JSONL trajectories
//! - [`envs`]: the 9x9 gridworld and the 3D point-mass reach task
//! - [`demogen`]: optimal, biased and suboptimal demonstration generators
//! - [`policy`], [`learners`], [`bank`]: policies, training algorithms, policy banks
//! - [`scoring`], [`recognizer`]: goal scores and one-shot inference

pub mod bank;
pub mod demogen;
pub mod envs;
mod error;
pub mod io;
pub mod learners;
pub mod policy;
pub mod recognizer;
pub mod rng;
pub mod scoring;
pub mod types;

pub use error::{Error, Result};
