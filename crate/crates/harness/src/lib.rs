//! Experiment driver for policy-bank goal recognition: configuration,
//! the seed x learner x metric x fraction evaluation grid, classification
//! statistics, report tables and Q-learning visit heatmaps.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod heatmap;
pub mod report;
pub mod stats;

pub use config::{ExperimentConfig, GoalPreset, Regime};
pub use experiment::{run_experiment, ExperimentOutcome};
pub use stats::{aggregate_stats, classification_metrics, ClassMetrics, StatSummary};
