//! Core domain types shared by every module.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A candidate goal: its position in the goal list and a self-describing label
/// (`"g_7_1"` for grid cells, `"r_0"` for reach targets).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoalId {
    pub index: usize,
    pub label: String,
}

impl GoalId {
    pub fn new(index: usize, label: impl Into<String>) -> Self {
        Self {
            index,
            label: label.into(),
        }
    }
}

impl fmt::Display for GoalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Grid action. Codes are frozen for file-format stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum DiscreteAction {
    TurnLeft = 0,
    TurnRight = 1,
    Forward = 2,
    Stay = 3,
}

impl DiscreteAction {
    pub const ALL: [DiscreteAction; 4] = [
        DiscreteAction::TurnLeft,
        DiscreteAction::TurnRight,
        DiscreteAction::Forward,
        DiscreteAction::Stay,
    ];
    pub const COUNT: usize = 4;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL
            .get(code)
            .copied()
            .ok_or_else(|| Error::InvalidAction(format!("discrete action code {code} not in [0,3]")))
    }

    pub fn short(self) -> char {
        match self {
            DiscreteAction::TurnLeft => 'L',
            DiscreteAction::TurnRight => 'R',
            DiscreteAction::Forward => 'F',
            DiscreteAction::Stay => 'S',
        }
    }
}

/// Reach displacement command, each component in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousAction(pub [f64; 3]);

impl ContinuousAction {
    /// Clips every component into `[-1, 1]`. Non-finite components are rejected.
    pub fn clipped(components: [f64; 3]) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidAction(format!("non-finite action {components:?}")));
        }
        Ok(Self(components.map(|c| c.clamp(-1.0, 1.0))))
    }

    pub fn zero() -> Self {
        Self([0.0; 3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Grid,
    Reach,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Grid => "grid",
            EnvKind::Reach => "reach",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid heading; `y` grows southward.
pub mod dir {
    pub const EAST: u8 = 0;
    pub const SOUTH: u8 = 1;
    pub const WEST: u8 = 2;
    pub const NORTH: u8 = 3;

    /// Unit displacement for a heading.
    pub fn delta(d: u8) -> (i32, i32) {
        match d {
            EAST => (1, 0),
            SOUTH => (0, 1),
            WEST => (-1, 0),
            _ => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridState {
    pub x: i32,
    pub y: i32,
    pub dir: u8,
}

impl GridState {
    pub fn new(x: i32, y: i32, dir: u8) -> Self {
        Self { x, y, dir }
    }

    pub fn pos(&self) -> (i32, i32) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachState {
    pub p: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum State {
    Grid(GridState),
    Reach(ReachState),
}

impl State {
    pub fn kind(&self) -> EnvKind {
        match self {
            State::Grid(_) => EnvKind::Grid,
            State::Reach(_) => EnvKind::Reach,
        }
    }

    pub fn as_grid(&self) -> Result<GridState> {
        match self {
            State::Grid(g) => Ok(*g),
            State::Reach(_) => Err(Error::InvalidState(format!("expected a grid state, got {self:?}"))),
        }
    }

    pub fn as_reach(&self) -> Result<ReachState> {
        match self {
            State::Reach(r) => Ok(*r),
            State::Grid(_) => Err(Error::InvalidState(format!("expected a reach state, got {self:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(DiscreteAction),
    Continuous(ContinuousAction),
}

impl Action {
    pub fn as_discrete(&self) -> Result<DiscreteAction> {
        match self {
            Action::Discrete(a) => Ok(*a),
            Action::Continuous(_) => Err(Error::InvalidAction("expected a discrete action".into())),
        }
    }

    pub fn as_continuous(&self) -> Result<ContinuousAction> {
        match self {
            Action::Continuous(a) => Ok(*a),
            Action::Discrete(_) => Err(Error::InvalidAction("expected a continuous action".into())),
        }
    }
}

/// One `(s_t, a_t)` pair of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: State,
    pub action: Action,
}

/// Fixed-horizon trajectory: `steps.len() == horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub final_state: State,
    pub env: EnvKind,
    /// Goal label, when the generating goal is known.
    pub goal: Option<String>,
    pub seed: u64,
    pub horizon: usize,
}

impl Trajectory {
    /// State reached after executing step `t`.
    pub fn state_after(&self, t: usize) -> &State {
        self.steps
            .get(t + 1)
            .map(|s| &s.state)
            .unwrap_or(&self.final_state)
    }
}

/// Demonstrations grouped per goal, in goal-index order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemoSet {
    pub per_goal: Vec<(GoalId, Vec<Trajectory>)>,
}

impl DemoSet {
    pub fn get(&self, label: &str) -> Option<&[Trajectory]> {
        self.per_goal
            .iter()
            .find(|(g, _)| g.label == label)
            .map(|(_, t)| t.as_slice())
    }

    pub fn goals(&self) -> impl Iterator<Item = &GoalId> {
        self.per_goal.iter().map(|(g, _)| g)
    }
}

/// A goal recognition task: candidate goals, demonstrations and an observed prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct GrdTask {
    pub goals: Vec<GoalId>,
    pub demos: DemoSet,
    pub observed: Vec<Step>,
}

/// Lists every violated task invariant; an empty list means the task is well formed.
pub fn validate_task(task: &GrdTask) -> Vec<String> {
    let mut violations = Vec::new();
    if task.goals.is_empty() {
        violations.push("goals empty".to_owned());
    }
    let mut indices = HashSet::new();
    let mut labels = HashSet::new();
    for g in &task.goals {
        if !indices.insert(g.index) {
            violations.push(format!("duplicate goal index {}", g.index));
        }
        if !labels.insert(g.label.as_str()) {
            violations.push(format!("duplicate goal label {}", g.label));
        }
    }
    for g in &task.goals {
        if task.demos.get(&g.label).is_none() {
            violations.push(format!("demos missing goal {}", g.label));
        }
    }
    let mut shape: Option<(EnvKind, usize)> = None;
    for (goal, trajs) in &task.demos.per_goal {
        for (i, t) in trajs.iter().enumerate() {
            if t.goal.as_deref() != Some(goal.label.as_str()) {
                violations.push(format!(
                    "trajectory {i} under goal {} is labelled {:?}",
                    goal.label, t.goal
                ));
            }
            if t.steps.len() != t.horizon {
                violations.push(format!(
                    "trajectory {i} under goal {} has {} steps but horizon {}",
                    goal.label,
                    t.steps.len(),
                    t.horizon
                ));
            }
            match shape {
                None => shape = Some((t.env, t.horizon)),
                Some((env, h)) if env != t.env || h != t.horizon => violations.push(format!(
                    "trajectory {i} under goal {} is {}/{} but the set is {}/{}",
                    goal.label, t.env, t.horizon, env, h
                )),
                _ => {}
            }
        }
    }
    if task.observed.is_empty() {
        violations.push("observed prefix empty".to_owned());
    }
    violations
}

/// Action distribution emitted by a policy for one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionDistribution {
    Discrete(Vec<f64>),
    Gaussian { mean: Vec<f64>, scale: Vec<f64> },
}

const NORM_TOL: f64 = 1e-9;

impl ActionDistribution {
    /// Validated probability vector: non-negative, summing to 1 within 1e-9.
    pub fn discrete(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(format!("invalid probabilities {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("probabilities sum to {sum}")));
        }
        Ok(Self::Discrete(probs))
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter(format!("invalid weights {weights:?}")));
        }
        Self::discrete(weights.iter().map(|w| w / sum).collect())
    }

    /// `softmax(values / temperature)`, computed with max subtraction.
    pub fn softmax(values: &[f64], temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::InvalidParameter(format!("temperature {temperature}")));
        }
        Ok(Self::Discrete(softmax(values, temperature)))
    }

    pub fn uniform(n: usize) -> Self {
        Self::Discrete(vec![1.0 / n as f64; n])
    }

    pub fn gaussian(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() {
            return Err(Error::InvalidParameter("mean/scale length mismatch".into()));
        }
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid gaussian mean {mean:?} scale {scale:?}"
            )));
        }
        Ok(Self::Gaussian { mean, scale })
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match self {
            ActionDistribution::Discrete(p) => Some(p),
            ActionDistribution::Gaussian { .. } => None,
        }
    }

    /// Point prediction: the probability vector or the Gaussian mean.
    pub fn point(&self) -> &[f64] {
        match self {
            ActionDistribution::Discrete(p) => p,
            ActionDistribution::Gaussian { mean, .. } => mean,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ActionDistribution::Discrete(_) => "discrete",
            ActionDistribution::Gaussian { .. } => "continuous",
        }
    }
}

/// Numerically stable softmax; the result sums to 1 up to rounding.
pub fn softmax(values: &[f64], temperature: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(goal: &str, horizon: usize) -> Trajectory {
        let s = State::Grid(GridState::new(1, 4, dir::EAST));
        Trajectory {
            steps: vec![
                Step {
                    state: s,
                    action: Action::Discrete(DiscreteAction::Stay)
                };
                horizon
            ],
            final_state: s,
            env: EnvKind::Grid,
            goal: Some(goal.to_owned()),
            seed: 0,
            horizon,
        }
    }

    fn task() -> GrdTask {
        let goals = vec![GoalId::new(0, "g_7_1"), GoalId::new(1, "g_7_7")];
        let demos = DemoSet {
            per_goal: goals
                .iter()
                .map(|g| (g.clone(), vec![traj(&g.label, 5)]))
                .collect(),
        };
        let observed = traj("g_7_1", 5).steps[..2].to_vec();
        GrdTask {
            goals,
            demos,
            observed,
        }
    }

    #[test]
    fn well_formed_task_has_no_violations() {
        assert!(validate_task(&task()).is_empty());
    }

    #[test]
    fn empty_goals_reported() {
        let mut t = task();
        t.goals.clear();
        assert_eq!(validate_task(&t), vec!["goals empty".to_owned()]);
    }

    #[test]
    fn missing_demo_goal_reported() {
        let mut t = task();
        t.goals[1].label = "g1".into();
        assert_eq!(validate_task(&t), vec!["demos missing goal g1".to_owned()]);
    }

    #[test]
    fn horizon_and_label_violations_reported() {
        let mut t = task();
        t.demos.per_goal[0].1[0].steps.pop();
        t.demos.per_goal[1].1[0].goal = Some("g_7_1".into());
        t.observed.clear();
        let v = validate_task(&t);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn discrete_distribution_normalization() {
        assert!(ActionDistribution::discrete(vec![0.5, 0.5]).is_ok());
        assert!(ActionDistribution::discrete(vec![0.5, 0.6]).is_err());
        assert!(ActionDistribution::discrete(vec![1.5, -0.5]).is_err());
        let d = ActionDistribution::from_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(d.probs().unwrap(), &[0.25, 0.75]);
        let s = ActionDistribution::softmax(&[1000.0, 1000.0, -1000.0], 1.0).unwrap();
        let p = s.probs().unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_needs_positive_scale() {
        assert!(ActionDistribution::gaussian(vec![0.0], vec![0.0]).is_err());
        assert!(ActionDistribution::gaussian(vec![0.0], vec![0.1]).is_ok());
    }

    #[test]
    fn continuous_action_clips() {
        let a = ContinuousAction::clipped([2.0, -3.0, 0.5]).unwrap();
        assert_eq!(a.0, [1.0, -1.0, 0.5]);
        assert!(ContinuousAction::clipped([f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn action_codes_are_frozen() {
        for (code, a) in DiscreteAction::ALL.iter().enumerate() {
            assert_eq!(a.code(), code);
            assert_eq!(DiscreteAction::from_code(code).unwrap(), *a);
        }
        assert!(DiscreteAction::from_code(4).is_err());
    }
}
