//! One-shot goal inference against a policy bank.

use serde::{Deserialize, Serialize};

use crate::bank::PolicyBank;
use crate::envs::{Domain, InteractionCounter};
use crate::policy::CountingPolicy;
use crate::rng::RngStream;
use crate::scoring::{score, MetricKind};
use crate::types::{softmax, GoalId, Step, Trajectory};
use crate::{Error, Result};

/// Steps up to and including the one that first reaches the trajectory's own
/// goal. The full horizon when the goal is unknown or never reached.
pub fn meaningful_length(traj: &Trajectory, domain: &Domain) -> Result<usize> {
    let Some(label) = traj.goal.as_deref() else {
        return Ok(traj.steps.len());
    };
    let target = domain.goal_target(label)?;
    for t in 0..traj.steps.len() {
        if domain.at_goal(&target, traj.state_after(t))? {
            return Ok(t + 1);
        }
    }
    Ok(traj.steps.len())
}

/// Number of observed steps for a fraction of a meaningful length.
pub fn prefix_length(meaningful: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    // Guards against 0.3 * 10 landing just above 3.
    let n = (fraction * meaningful as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(n.min(meaningful.max(1)))
}

/// First `max(1, ceil(fraction * meaningful_length))` steps.
pub fn observe_prefix(traj: &Trajectory, domain: &Domain, fraction: f64) -> Result<Vec<Step>> {
    let n = prefix_length(meaningful_length(traj, domain)?, fraction)?;
    Ok(traj.steps[..n.min(traj.steps.len())].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalScore {
    pub index: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_goal_scores: Vec<GoalScore>,
    pub chosen: GoalId,
    pub metric: String,
    pub prefix_length: usize,
    pub policy_calls: u64,
    pub env_calls: u64,
    /// Another goal shares the winning score.
    pub tie: bool,
}

impl ScoreReport {
    pub fn score_of(&self, label: &str) -> Option<f64> {
        self.per_goal_scores.iter().find(|g| g.label == label).map(|g| g.score)
    }

    /// Softmax over the per-goal scores, for display.
    pub fn posterior(&self, temperature: f64) -> Vec<f64> {
        let scores: Vec<f64> = self.per_goal_scores.iter().map(|g| g.score).collect();
        softmax(&scores, temperature)
    }
}

/// Index of the maximum; the earliest wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<(usize, bool)> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.map_or(true, |b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best.map(|b| (b, scores.iter().enumerate().any(|(i, s)| i != b && *s == scores[b])))
}

/// Scores `prefix` against every policy of `bank`. Goal `g` draws its
/// samples from `rng.fork("score/{g}")`, so the report does not depend on
/// evaluation order.
pub fn infer_goal(prefix: &[Step], bank: &PolicyBank, metric: &MetricKind, rng: &RngStream) -> Result<ScoreReport> {
    infer_goal_audited(prefix, bank, metric, rng, &InteractionCounter::new())
}

/// As [`infer_goal`], failing if `env_counter` or any reward head moves
/// while the bank is being queried.
pub fn infer_goal_audited(
    prefix: &[Step],
    bank: &PolicyBank,
    metric: &MetricKind,
    rng: &RngStream,
    env_counter: &InteractionCounter,
) -> Result<ScoreReport> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if prefix.is_empty() {
        return Err(Error::EmptyPrefix);
    }
    let env_before = env_counter.get();
    let reward_before: u64 = bank.entries.iter().filter_map(|e| e.reward_head.as_ref()).map(|h| h.calls()).sum();

    let mut per_goal_scores = Vec::with_capacity(bank.len());
    let mut policy_calls = 0;
    for entry in &bank.entries {
        let counted = CountingPolicy::new(&entry.policy);
        let mut stream = rng.fork(&format!("score/{}", entry.goal.label));
        let s = score(metric, prefix, &counted, &mut stream)?;
        policy_calls += counted.calls();
        per_goal_scores.push(GoalScore {
            index: entry.goal.index,
            label: entry.goal.label.clone(),
            score: s,
        });
    }

    let env_calls = env_counter.get() - env_before;
    let reward_after: u64 = bank.entries.iter().filter_map(|e| e.reward_head.as_ref()).map(|h| h.calls()).sum();
    if env_calls != 0 || reward_after != reward_before {
        return Err(Error::EnvInteractionDuringInference(env_calls + reward_after - reward_before));
    }

    let scores: Vec<f64> = per_goal_scores.iter().map(|g| g.score).collect();
    let (best, tie) = argmax_first(&scores).ok_or(Error::EmptyBank)?;
    Ok(ScoreReport {
        chosen: bank.entries[best].goal.clone(),
        per_goal_scores,
        metric: metric.to_string(),
        prefix_length: prefix.len(),
        policy_calls,
        env_calls,
        tie,
    })
}
