//! The two evaluation domains.
//!
//! - A 9x9 gridworld (border walls, free cells `x, y` in `1..=7`) with one
//!   obstacle at `(7, 4)` and a sparse, time-discounted goal reward.
//! - A kinematic 3D point mass that moves `step_scale * clip(a, -1, 1)` per
//!   step with a dense negative-distance reward.
//!
//! Transitions are pure functions of immutable specs. Every environment step
//! taken through [`rollout`] or a learner is recorded on an
//! [`InteractionCounter`], which is how planner-free inference is audited.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::policy::Policy;
use crate::rng::RngStream;
use crate::types::{
    dir, Action, ActionDistribution, ContinuousAction, DiscreteAction, EnvKind, GoalId, GridState,
    ReachState, State, Step, Trajectory,
};
use crate::{Error, Result};

/// Gridworld layout. `width`/`height` include the border walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub width: i32,
    pub height: i32,
    pub obstacles: Vec<(i32, i32)>,
    pub start: GridState,
    /// Denominator of the time-discounted success reward.
    pub max_steps: u32,
    /// Demonstration and rollout length.
    pub horizon: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            width: 9,
            height: 9,
            obstacles: vec![(7, 4)],
            start: GridState::new(1, 4, dir::EAST),
            max_steps: 324,
            horizon: 50,
        }
    }
}

/// A grid goal cell, labelled `g_{x}_{y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGoal {
    pub x: i32,
    pub y: i32,
}

impl GridGoal {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn label(&self) -> String {
        format!("g_{}_{}", self.x, self.y)
    }

    pub fn parse(label: &str) -> Result<Self> {
        let bad = || Error::InvalidGoal(format!("{label:?} is not a grid goal label"));
        let rest = label.strip_prefix("g_").ok_or_else(bad)?;
        let (x, y) = rest.split_once('_').ok_or_else(bad)?;
        Ok(Self {
            x: x.parse().map_err(|_| bad())?,
            y: y.parse().map_err(|_| bad())?,
        })
    }
}

impl GridSpec {
    pub fn inner_width(&self) -> i32 {
        self.width - 2
    }

    pub fn inner_height(&self) -> i32 {
        self.height - 2
    }

    pub fn is_free(&self, x: i32, y: i32) -> bool {
        (1..=self.inner_width()).contains(&x)
            && (1..=self.inner_height()).contains(&y)
            && !self.obstacles.contains(&(x, y))
    }

    pub fn is_valid(&self, s: &GridState) -> bool {
        self.is_free(s.x, s.y) && s.dir < 4
    }

    pub fn validate_goal(&self, goal: GridGoal) -> Result<()> {
        if !self.is_free(goal.x, goal.y) {
            return Err(Error::InvalidGoal(format!("{} is not a free cell", goal.label())));
        }
        if (goal.x, goal.y) == self.start.pos() {
            return Err(Error::InvalidGoal(format!("{} coincides with the start", goal.label())));
        }
        Ok(())
    }

    /// Number of indexable states: every interior cell times four headings.
    pub fn num_states(&self) -> usize {
        (self.inner_width() * self.inner_height() * 4) as usize
    }

    /// Dense index of an interior state: `((y-1) * inner_width + (x-1)) * 4 + dir`.
    pub fn index(&self, s: &GridState) -> usize {
        (((s.y - 1) * self.inner_width() + (s.x - 1)) * 4 + s.dir as i32) as usize
    }

    pub fn state_at(&self, index: usize) -> GridState {
        let i = index as i32;
        let dir = (i % 4) as u8;
        let cell = i / 4;
        GridState::new(cell % self.inner_width() + 1, cell / self.inner_width() + 1, dir)
    }

    /// All valid states in index order.
    pub fn free_states(&self) -> Vec<GridState> {
        (0..self.num_states())
            .map(|i| self.state_at(i))
            .filter(|s| self.is_valid(s))
            .collect()
    }

    /// Deterministic transition, ignoring rewards.
    pub fn transition(&self, s: &GridState, a: DiscreteAction) -> GridState {
        match a {
            DiscreteAction::TurnLeft => GridState::new(s.x, s.y, (s.dir + 3) % 4),
            DiscreteAction::TurnRight => GridState::new(s.x, s.y, (s.dir + 1) % 4),
            DiscreteAction::Forward => {
                let (dx, dy) = dir::delta(s.dir);
                if self.is_free(s.x + dx, s.y + dy) {
                    GridState::new(s.x + dx, s.y + dy, s.dir)
                } else {
                    *s
                }
            }
            DiscreteAction::Stay => *s,
        }
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: State,
    pub reward: f64,
    pub at_goal: bool,
}

/// Grid transition with the sparse success reward.
///
/// `step_count` is the number of steps taken so far including this one. The
/// reward `1 - 0.9 * step_count / max_steps` is paid only on the step where
/// the agent enters the goal cell; every other step pays 0. Moving forward
/// into a wall or the obstacle leaves the position unchanged.
pub fn grid_step(
    spec: &GridSpec,
    s: &GridState,
    a: DiscreteAction,
    step_count: u32,
    goal: GridGoal,
) -> Result<StepOutcome> {
    if !spec.is_valid(s) {
        return Err(Error::InvalidState(format!("{s:?} is not a free grid state")));
    }
    let next = spec.transition(s, a);
    let was_at_goal = s.pos() == (goal.x, goal.y);
    let at_goal = next.pos() == (goal.x, goal.y);
    let reward = if at_goal && !was_at_goal {
        1.0 - 0.9 * (step_count as f64 / spec.max_steps as f64)
    } else {
        0.0
    };
    Ok(StepOutcome {
        next_state: State::Grid(next),
        reward,
        at_goal,
    })
}

/// Point-mass reach task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachSpec {
    pub start: [f64; 3],
    /// Metres moved per unit action.
    pub step_scale: f64,
    pub goals: Vec<[f64; 3]>,
    pub horizon: usize,
    /// Distance below which the agent counts as at the goal.
    pub goal_tolerance: f64,
}

impl Default for ReachSpec {
    fn default() -> Self {
        Self {
            start: [0.0; 3],
            step_scale: 0.05,
            goals: vec![
                [0.2, 0.2, 0.2],
                [0.2, -0.2, 0.2],
                [-0.2, 0.2, 0.2],
                [-0.2, -0.2, 0.2],
            ],
            horizon: 50,
            goal_tolerance: 0.01,
        }
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl ReachSpec {
    pub fn goal_label(index: usize) -> String {
        format!("r_{index}")
    }

    pub fn goal_position(&self, label: &str) -> Result<[f64; 3]> {
        let idx: usize = label
            .strip_prefix("r_")
            .and_then(|i| i.parse().ok())
            .ok_or_else(|| Error::InvalidGoal(format!("{label:?} is not a reach goal label")))?;
        self.goals
            .get(idx)
            .copied()
            .ok_or_else(|| Error::InvalidGoal(format!("reach goal {label} out of range")))
    }

    pub fn validate(&self) -> Result<()> {
        let reach = self.step_scale * self.horizon as f64;
        for (i, g) in self.goals.iter().enumerate() {
            if distance(g, &self.start) > reach {
                return Err(Error::InvalidGoal(format!("reach goal r_{i} is beyond {reach} m")));
            }
            for (j, h) in self.goals.iter().enumerate().skip(i + 1) {
                if g == h {
                    return Err(Error::InvalidGoal(format!("reach goals r_{i} and r_{j} coincide")));
                }
            }
        }
        Ok(())
    }
}

/// Point-mass transition: `p' = p + step_scale * clip(a)`, reward `-|p' - goal|`.
pub fn reach_step(spec: &ReachSpec, s: &ReachState, a: &[f64; 3], goal: &[f64; 3]) -> Result<StepOutcome> {
    if s.p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite reach state {:?}", s.p)));
    }
    let a = ContinuousAction::clipped(*a)?;
    let mut p = s.p;
    for (pi, ai) in p.iter_mut().zip(a.0) {
        *pi += spec.step_scale * ai;
    }
    let d = distance(&p, goal);
    Ok(StepOutcome {
        next_state: State::Reach(ReachState { p }),
        reward: -d,
        at_goal: d < spec.goal_tolerance,
    })
}

/// Shared, thread-safe count of environment transitions.
#[derive(Debug, Clone, Default)]
pub struct InteractionCounter(Arc<AtomicU64>);

impl InteractionCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Environment description shared by generators, learners and the recognizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Grid(GridSpec),
    Reach(ReachSpec),
}

/// Where a goal sits in its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalTarget {
    Grid(GridGoal),
    Reach([f64; 3]),
}

impl Domain {
    pub fn kind(&self) -> EnvKind {
        match self {
            Domain::Grid(_) => EnvKind::Grid,
            Domain::Reach(_) => EnvKind::Reach,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Domain::Grid(g) => g.horizon,
            Domain::Reach(r) => r.horizon,
        }
    }

    pub fn start(&self) -> State {
        match self {
            Domain::Grid(g) => State::Grid(g.start),
            Domain::Reach(r) => State::Reach(ReachState { p: r.start }),
        }
    }

    pub fn goal_target(&self, label: &str) -> Result<GoalTarget> {
        match self {
            Domain::Grid(spec) => {
                let g = GridGoal::parse(label)?;
                spec.validate_goal(g)?;
                Ok(GoalTarget::Grid(g))
            }
            Domain::Reach(spec) => Ok(GoalTarget::Reach(spec.goal_position(label)?)),
        }
    }

    /// One environment step toward `goal`; `step_count` counts this step.
    pub fn step(&self, goal: &GoalTarget, s: &State, a: &Action, step_count: u32) -> Result<StepOutcome> {
        match (self, goal, s, a) {
            (Domain::Grid(spec), GoalTarget::Grid(g), State::Grid(gs), Action::Discrete(d)) => {
                grid_step(spec, gs, *d, step_count, *g)
            }
            (Domain::Reach(spec), GoalTarget::Reach(g), State::Reach(rs), Action::Continuous(c)) => {
                reach_step(spec, rs, &c.0, g)
            }
            _ => Err(Error::InvalidAction(format!(
                "action {a:?} / state {s:?} do not belong to the {} domain",
                self.kind()
            ))),
        }
    }

    /// Whether `s` satisfies the goal's success test.
    pub fn at_goal(&self, goal: &GoalTarget, s: &State) -> Result<bool> {
        match (self, goal, s) {
            (Domain::Grid(_), GoalTarget::Grid(g), State::Grid(gs)) => Ok(gs.pos() == (g.x, g.y)),
            (Domain::Reach(spec), GoalTarget::Reach(g), State::Reach(rs)) => {
                Ok(distance(&rs.p, g) < spec.goal_tolerance)
            }
            _ => Err(Error::InvalidState(format!("{s:?} does not match the {} domain", self.kind()))),
        }
    }
}

/// Index-level view of a finite environment, used by the tabular learners.
pub trait DiscreteEnv: Sync {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn start(&self) -> usize;
    /// `step_count` counts this step (1-based).
    fn step(&self, s: usize, a: usize, step_count: u32) -> Result<Transition>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: usize,
    pub reward: f64,
    /// The goal was entered on this step.
    pub done: bool,
}

/// Vector-level view of a continuous environment.
pub trait ContinuousEnv: Sync {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn start(&self) -> Vec<f64>;
    fn step(&self, s: &[f64], a: &[f64]) -> Result<(Vec<f64>, f64, bool)>;
}

/// The gridworld with a fixed goal, as a [`DiscreteEnv`].
#[derive(Debug, Clone)]
pub struct GridTask {
    pub spec: GridSpec,
    pub goal: GridGoal,
}

impl DiscreteEnv for GridTask {
    fn num_states(&self) -> usize {
        self.spec.num_states()
    }

    fn num_actions(&self) -> usize {
        DiscreteAction::COUNT
    }

    fn start(&self) -> usize {
        self.spec.index(&self.spec.start)
    }

    fn step(&self, s: usize, a: usize, step_count: u32) -> Result<Transition> {
        let state = self.spec.state_at(s);
        let out = grid_step(&self.spec, &state, DiscreteAction::from_code(a)?, step_count, self.goal)?;
        let next = out.next_state.as_grid()?;
        Ok(Transition {
            next: self.spec.index(&next),
            reward: out.reward,
            done: out.at_goal && state.pos() != (self.goal.x, self.goal.y),
        })
    }
}

/// The reach task with a fixed goal, as a [`ContinuousEnv`].
#[derive(Debug, Clone)]
pub struct ReachTask {
    pub spec: ReachSpec,
    pub goal: [f64; 3],
}

impl ContinuousEnv for ReachTask {
    fn obs_dim(&self) -> usize {
        3
    }

    fn act_dim(&self) -> usize {
        3
    }

    fn start(&self) -> Vec<f64> {
        self.spec.start.to_vec()
    }

    fn step(&self, s: &[f64], a: &[f64]) -> Result<(Vec<f64>, f64, bool)> {
        let (Ok(p), Ok(a)) = (<[f64; 3]>::try_from(s), <[f64; 3]>::try_from(a)) else {
            return Err(Error::InvalidState("reach vectors must have 3 components".into()));
        };
        let out = reach_step(&self.spec, &ReachState { p }, &a, &self.goal)?;
        Ok((out.next_state.as_reach()?.p.to_vec(), out.reward, out.at_goal))
    }
}

/// How a policy picks actions during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// Most probable discrete action (lowest code on ties) or the Gaussian mean.
    Greedy,
    Sample,
}

/// Something that chooses an action at time `t` in state `state`.
pub trait Actor {
    fn act(&mut self, t: usize, state: &State, rng: &mut RngStream) -> Result<Action>;
}

impl<F> Actor for F
where
    F: FnMut(usize, &State, &mut RngStream) -> Result<Action>,
{
    fn act(&mut self, t: usize, state: &State, rng: &mut RngStream) -> Result<Action> {
        self(t, state, rng)
    }
}

/// Replays a fixed action list, then emits `stay`.
#[derive(Debug, Clone)]
pub struct PlanActor {
    pub plan: Vec<DiscreteAction>,
}

impl Actor for PlanActor {
    fn act(&mut self, t: usize, _state: &State, _rng: &mut RngStream) -> Result<Action> {
        Ok(Action::Discrete(self.plan.get(t).copied().unwrap_or(DiscreteAction::Stay)))
    }
}

/// Acts with a [`Policy`].
pub struct PolicyActor<'a> {
    pub policy: &'a dyn Policy,
    pub mode: RolloutMode,
}

/// Draws an action from `dist`, clipping continuous samples to `[-1, 1]`.
pub fn choose_action(
    dist: &ActionDistribution,
    state: &State,
    mode: RolloutMode,
    rng: &mut RngStream,
) -> Result<Action> {
    let invalid = |reason: &str| Error::InvalidDistribution {
        state: format!("{state:?}"),
        reason: reason.to_owned(),
    };
    match (state, dist) {
        (State::Grid(_), ActionDistribution::Discrete(p)) => {
            if p.len() != DiscreteAction::COUNT {
                return Err(invalid("expected 4 action probabilities"));
            }
            let code = match mode {
                RolloutMode::Greedy => argmax(p),
                RolloutMode::Sample => sample_categorical(p, rng),
            };
            Ok(Action::Discrete(DiscreteAction::from_code(code)?))
        }
        (State::Reach(_), ActionDistribution::Gaussian { mean, scale }) => {
            let (Ok(mean), Ok(scale)) = (<[f64; 3]>::try_from(mean.as_slice()), <[f64; 3]>::try_from(scale.as_slice()))
            else {
                return Err(invalid("expected a 3-dimensional Gaussian"));
            };
            let a = match mode {
                RolloutMode::Greedy => mean,
                RolloutMode::Sample => {
                    let mut a = mean;
                    for (ai, si) in a.iter_mut().zip(scale) {
                        let z: f64 = StandardNormal.sample(rng);
                        *ai += si * z;
                    }
                    a
                }
            };
            Ok(Action::Continuous(ContinuousAction::clipped(a).map_err(|_| invalid("non-finite action"))?))
        }
        _ => Err(invalid("distribution kind does not match the state's domain")),
    }
}

impl Actor for PolicyActor<'_> {
    fn act(&mut self, _t: usize, state: &State, rng: &mut RngStream) -> Result<Action> {
        let dist = self.policy.distribution(state).map_err(|e| Error::InvalidDistribution {
            state: format!("{state:?}"),
            reason: e.to_string(),
        })?;
        choose_action(&dist, state, self.mode, rng)
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave `acc` a hair below 1.
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Runs exactly `horizon` steps toward `goal`. Episodes never stop at the
/// goal; the actor keeps acting. Adds `horizon` to `counter`.
pub fn rollout(
    domain: &Domain,
    goal: &GoalId,
    actor: &mut dyn Actor,
    horizon: usize,
    rng: &mut RngStream,
    counter: &InteractionCounter,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("rollout horizon must be >= 1".into()));
    }
    let target = domain.goal_target(&goal.label)?;
    let mut state = domain.start();
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let action = actor.act(t, &state, rng)?;
        let out = domain.step(&target, &state, &action, (t + 1) as u32)?;
        let recorded = match action {
            // Record what the environment executed.
            Action::Continuous(c) => Action::Continuous(ContinuousAction::clipped(c.0)?),
            a => a,
        };
        steps.push(Step {
            state,
            action: recorded,
        });
        state = out.next_state;
    }
    counter.add(horizon as u64);
    Ok(Trajectory {
        steps,
        final_state: state,
        env: domain.kind(),
        goal: Some(goal.label.clone()),
        seed,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn forward_into_free_cell() {
        let out = grid_step(&grid(), &GridState::new(1, 4, dir::EAST), DiscreteAction::Forward, 1, GridGoal::new(7, 1)).unwrap();
        assert_eq!(out.next_state, State::Grid(GridState::new(2, 4, dir::EAST)));
        assert_eq!(out.reward, 0.0);
        assert!(!out.at_goal);
    }

    #[test]
    fn obstacle_blocks_forward() {
        let s = GridState::new(6, 4, dir::EAST);
        let out = grid_step(&grid(), &s, DiscreteAction::Forward, 1, GridGoal::new(7, 1)).unwrap();
        assert_eq!(out.next_state, State::Grid(s));
    }

    #[test]
    fn walls_block_forward() {
        let s = GridState::new(1, 1, dir::NORTH);
        assert_eq!(grid().transition(&s, DiscreteAction::Forward), s);
    }

    #[test]
    fn turns_rotate_heading() {
        let s = GridState::new(3, 3, dir::EAST);
        assert_eq!(grid().transition(&s, DiscreteAction::TurnLeft).dir, dir::NORTH);
        assert_eq!(grid().transition(&s, DiscreteAction::TurnRight).dir, dir::SOUTH);
        assert_eq!(grid().transition(&s, DiscreteAction::Stay), s);
    }

    #[test]
    fn success_reward_formula() {
        let s = GridState::new(6, 1, dir::EAST);
        let out = grid_step(&grid(), &s, DiscreteAction::Forward, 9, GridGoal::new(7, 1)).unwrap();
        assert!(out.at_goal);
        assert!((out.reward - 0.975).abs() < 1e-12);
        // Staying on the goal pays nothing further.
        let again = grid_step(&grid(), &GridState::new(7, 1, dir::EAST), DiscreteAction::Stay, 10, GridGoal::new(7, 1)).unwrap();
        assert!(again.at_goal);
        assert_eq!(again.reward, 0.0);
    }

    #[test]
    fn invalid_state_rejected() {
        let err = grid_step(&grid(), &GridState::new(7, 4, 0), DiscreteAction::Stay, 1, GridGoal::new(7, 1));
        assert!(matches!(err, Err(Error::InvalidState(_))));
        let err = grid_step(&grid(), &GridState::new(0, 4, 0), DiscreteAction::Stay, 1, GridGoal::new(7, 1));
        assert!(err.is_err());
    }

    #[test]
    fn grid_transition_closure_and_reward_bounds() {
        let spec = grid();
        let goal = GridGoal::new(7, 1);
        let mut count = 0;
        for s in spec.free_states() {
            for a in DiscreteAction::ALL {
                for step in [1u32, 17, 50] {
                    let out = grid_step(&spec, &s, a, step, goal).unwrap();
                    assert!(spec.is_valid(&out.next_state.as_grid().unwrap()));
                    if out.at_goal {
                        assert!(out.reward == 0.0 || (out.reward > 0.1 && out.reward <= 1.0));
                    } else {
                        assert_eq!(out.reward, 0.0);
                    }
                }
                count += 1;
            }
        }
        // 48 free cells x 4 headings x 4 actions.
        assert_eq!(count, 48 * 4 * 4);
    }

    #[test]
    fn index_round_trip() {
        let spec = grid();
        assert_eq!(spec.num_states(), 196);
        for i in 0..spec.num_states() {
            assert_eq!(spec.index(&spec.state_at(i)), i);
        }
        assert_eq!(spec.free_states().len(), 192);
    }

    #[test]
    fn goal_labels() {
        assert_eq!(GridGoal::new(7, 1).label(), "g_7_1");
        assert_eq!(GridGoal::parse("g_5_7").unwrap(), GridGoal::new(5, 7));
        assert!(GridGoal::parse("r_0").is_err());
        assert!(grid().validate_goal(GridGoal::new(7, 4)).is_err());
        assert!(grid().validate_goal(GridGoal::new(1, 4)).is_err());
    }

    #[test]
    fn reach_moves_and_rewards() {
        let spec = ReachSpec::default();
        let out = reach_step(&spec, &ReachState { p: [0.0; 3] }, &[1.0, 0.0, 0.0], &[0.2, 0.0, 0.0]).unwrap();
        let p = out.next_state.as_reach().unwrap().p;
        assert!((p[0] - 0.05).abs() < 1e-15 && p[1] == 0.0 && p[2] == 0.0);
        assert!((out.reward + 0.15).abs() < 1e-12);
        let clipped = reach_step(&spec, &ReachState { p: [0.0; 3] }, &[2.0, 0.0, 0.0], &[0.2, 0.0, 0.0]).unwrap();
        assert_eq!(clipped.next_state, out.next_state);
        assert!(reach_step(&spec, &ReachState { p: [0.0; 3] }, &[f64::NAN, 0.0, 0.0], &[0.2, 0.0, 0.0]).is_err());
    }

    #[test]
    fn reach_spec_validation() {
        assert!(ReachSpec::default().validate().is_ok());
        let mut far = ReachSpec::default();
        far.goals.push([10.0, 0.0, 0.0]);
        assert!(far.validate().is_err());
        let mut dup = ReachSpec::default();
        dup.goals.push(dup.goals[0]);
        assert!(dup.validate().is_err());
    }

    #[test]
    fn stay_rollout_is_constant_and_counted() {
        let domain = Domain::Grid(grid());
        let counter = InteractionCounter::new();
        let mut rng = derive_stream(1, "r");
        let mut actor = PlanActor { plan: vec![] };
        let t = rollout(&domain, &GoalId::new(0, "g_7_1"), &mut actor, 5, &mut rng, &counter, 0).unwrap();
        assert_eq!(t.steps.len(), 5);
        assert!(t.steps.iter().all(|s| s.state == domain.start()));
        assert_eq!(counter.get(), 5);
    }

    #[test]
    fn categorical_sampling_respects_support() {
        let mut rng = derive_stream(3, "cat");
        for _ in 0..1000 {
            let i = sample_categorical(&[0.0, 0.3, 0.0, 0.7], &mut rng);
            assert!(i == 1 || i == 3);
        }
        assert_eq!(argmax(&[0.2, 0.4, 0.4, 0.0]), 1);
    }
}
