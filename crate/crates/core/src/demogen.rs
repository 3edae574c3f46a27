//! Demonstration generators for the three behavioral regimes.
//!
//! Grid experts replay a plan (shortest, biased-shortest, or shortest with
//! 180-degree detours) and then stay put. The reach expert is a clipped
//! proportional controller whose actions may carry additive noise.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::envs::{rollout, distance, Domain, GridGoal, GridSpec, InteractionCounter, PlanActor, ReachSpec};
use crate::rng::RngStream;
use crate::types::{dir, Action, ContinuousAction, DiscreteAction, GoalId, GridState, State, Trajectory};
use crate::{Error, Result};

use DiscreteAction::{Forward as F, TurnLeft as L, TurnRight as R};

/// Shortest action sequence from `start` to the goal cell.
///
/// Breadth-first search over `(x, y, dir)` expanding actions in the order
/// turn-left, turn-right, forward, and keeping the first parent found. This
/// yields the lexicographically smallest plan among all shortest ones.
pub fn optimal_plan(spec: &GridSpec, start: GridState, goal: GridGoal) -> Result<Vec<DiscreteAction>> {
    if !spec.is_valid(&start) {
        return Err(Error::InvalidState(format!("{start:?} is not a free grid state")));
    }
    if !spec.is_free(goal.x, goal.y) {
        return Err(Error::InvalidGoal(format!("{} is not a free cell", goal.label())));
    }
    let n = spec.num_states();
    let mut parent: Vec<Option<(usize, DiscreteAction)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    let s0 = spec.index(&start);
    seen[s0] = true;
    queue.push_back(start);
    while let Some(s) = queue.pop_front() {
        if s.pos() == (goal.x, goal.y) {
            let mut plan = Vec::new();
            let mut cur = spec.index(&s);
            while let Some((prev, a)) = parent[cur] {
                plan.push(a);
                cur = prev;
            }
            plan.reverse();
            return Ok(plan);
        }
        for a in [L, R, F] {
            let next = spec.transition(&s, a);
            let i = spec.index(&next);
            if !seen[i] {
                seen[i] = true;
                parent[i] = Some((spec.index(&s), a));
                queue.push_back(next);
            }
        }
    }
    Err(Error::Unreachable(goal.label()))
}

/// Which heading the biased expert travels first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasSpec {
    NorthFirst,
    EastFirst,
    SouthFirst,
    WestFirst,
}

impl BiasSpec {
    pub fn heading(self) -> u8 {
        match self {
            BiasSpec::NorthFirst => dir::NORTH,
            BiasSpec::EastFirst => dir::EAST,
            BiasSpec::SouthFirst => dir::SOUTH,
            BiasSpec::WestFirst => dir::WEST,
        }
    }
}

/// Preference used when a config gives none: goals north of the start are
/// approached north-first when that is optimal, all others east-first.
pub fn default_bias(spec: &GridSpec, goal: GridGoal) -> BiasSpec {
    if goal.y < spec.start.y && biased_plan(spec, spec.start, goal, BiasSpec::NorthFirst).is_ok() {
        BiasSpec::NorthFirst
    } else {
        BiasSpec::EastFirst
    }
}

fn turns_to(from: u8, to: u8) -> Vec<DiscreteAction> {
    match (to + 4 - from) % 4 {
        0 => vec![],
        1 => vec![R],
        3 => vec![L],
        _ => vec![L, L],
    }
}

/// Heading that reduces the gap along the axis of `heading`, if any.
fn toward(heading: u8, s: &GridState, goal: GridGoal) -> Option<u8> {
    let horizontal = heading == dir::EAST || heading == dir::WEST;
    let gap = if horizontal { goal.x - s.x } else { goal.y - s.y };
    match (horizontal, gap.signum()) {
        (_, 0) => None,
        (true, 1) => Some(dir::EAST),
        (true, _) => Some(dir::WEST),
        (false, 1) => Some(dir::SOUTH),
        (false, _) => Some(dir::NORTH),
    }
}

/// Waypoint route: as far as possible along the preferred heading, then along
/// the other axis, then the rest of the preferred axis. Fails unless the route
/// reaches the goal with the optimal plan length.
pub fn biased_plan(spec: &GridSpec, start: GridState, goal: GridGoal, bias: BiasSpec) -> Result<Vec<DiscreteAction>> {
    let optimal = optimal_plan(spec, start, goal)?;
    let primary = bias.heading();
    if toward(primary, &start, goal).is_some_and(|h| h != primary) {
        return Err(Error::InvalidParameter(format!(
            "bias {bias:?} points away from goal {}",
            goal.label()
        )));
    }
    let secondary = if primary == dir::EAST || primary == dir::WEST {
        dir::NORTH
    } else {
        dir::EAST
    };
    let mut s = start;
    let mut plan = Vec::new();
    for axis in [primary, secondary, primary] {
        let Some(heading) = toward(axis, &s, goal) else {
            continue;
        };
        let mut legs = Vec::new();
        let mut probe = GridState::new(s.x, s.y, heading);
        while toward(axis, &probe, goal) == Some(heading) {
            let next = spec.transition(&probe, F);
            if next == probe {
                break;
            }
            legs.push(F);
            probe = next;
        }
        if !legs.is_empty() {
            plan.extend(turns_to(s.dir, heading));
            plan.extend(legs);
            s = probe;
        }
    }
    if s.pos() != (goal.x, goal.y) {
        let (dx, dy) = dir::delta(s.dir);
        return Err(Error::BiasBlocked {
            goal: goal.label(),
            x: s.x + dx,
            y: s.y + dy,
        });
    }
    if plan.len() != optimal.len() {
        return Err(Error::BiasNotOptimal {
            goal: goal.label(),
            biased: plan.len(),
            optimal: optimal.len(),
        });
    }
    Ok(plan)
}

/// Probability of inserting a 180-degree detour before each planned action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnInsertionSpec {
    pub p: f64,
}

impl Default for TurnInsertionSpec {
    fn default() -> Self {
        Self { p: 0.5 }
    }
}

/// The detour: turn around, then turn back.
pub const DETOUR: [DiscreteAction; 4] = [L, L, R, R];

/// Inserts [`DETOUR`] before each action with probability `spec.p`.
pub fn corrupt_suboptimal(
    plan: &[DiscreteAction],
    spec: TurnInsertionSpec,
    rng: &mut RngStream,
) -> Result<Vec<DiscreteAction>> {
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(Error::InvalidParameter(format!("insertion probability {}", spec.p)));
    }
    let mut out = Vec::with_capacity(plan.len() * 2);
    for &a in plan {
        if rng.random_bool(spec.p) {
            out.extend(DETOUR);
        }
        out.push(a);
    }
    Ok(out)
}

/// Grid behavioral regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridRegime {
    Optimal,
    /// `None` applies [`default_bias`] per goal.
    Biased {
        #[serde(default)]
        bias: Option<BiasSpec>,
    },
    Suboptimal { insertion: TurnInsertionSpec },
}

/// `n` grid demonstrations of horizon `spec.horizon`, padded with `stay`.
/// Plans longer than the horizon are truncated.
pub fn gen_grid_demos(
    spec: &GridSpec,
    goal: &GoalId,
    regime: GridRegime,
    n: usize,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(Error::InvalidParameter("number of demonstrations must be >= 1".into()));
    }
    let target = GridGoal::parse(&goal.label)?;
    spec.validate_goal(target)?;
    let base = match regime {
        GridRegime::Optimal | GridRegime::Suboptimal { .. } => optimal_plan(spec, spec.start, target)?,
        GridRegime::Biased { bias } => {
            biased_plan(spec, spec.start, target, bias.unwrap_or_else(|| default_bias(spec, target)))?
        }
    };
    let domain = Domain::Grid(spec.clone());
    let seed = rng.master_seed();
    (0..n)
        .map(|i| {
            let plan = match regime {
                GridRegime::Suboptimal { insertion } => {
                    corrupt_suboptimal(&base, insertion, &mut rng.fork(&format!("demo{i}")))?
                }
                _ => base.clone(),
            };
            let mut actor = PlanActor { plan };
            rollout(&domain, goal, &mut actor, spec.horizon, rng, counter, seed)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
}

/// Additive per-component action noise for the reach expert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
}

impl NoiseSpec {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self.kind {
            NoiseKind::Gaussian => Normal::new(0.0, self.level)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng),
            NoiseKind::Uniform => Uniform::new_inclusive(-self.level, self.level)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng),
        })
    }
}

/// Noise-free expert action `clip((goal - p) / step_scale)`.
pub fn reach_expert_action(spec: &ReachSpec, p: &[f64; 3], goal: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| ((goal[i] - p[i]) / spec.step_scale).clamp(-1.0, 1.0))
}

/// `n` reach demonstrations from the proportional expert, with optional noise.
pub fn gen_reach_demos(
    spec: &ReachSpec,
    goal: &GoalId,
    noise: Option<NoiseSpec>,
    n: usize,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(Error::InvalidParameter("number of demonstrations must be >= 1".into()));
    }
    if let Some(ns) = noise {
        if !(ns.level >= 0.0 && ns.level.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level {}", ns.level)));
        }
    }
    let target = spec.goal_position(&goal.label)?;
    let domain = Domain::Reach(spec.clone());
    let mut actor = |_t: usize, s: &State, rng: &mut RngStream| -> Result<Action> {
        let mut a = reach_expert_action(spec, &s.as_reach()?.p, &target);
        if let Some(ns) = noise.filter(|ns| ns.level > 0.0) {
            for ai in a.iter_mut() {
                *ai += ns.sample(rng)?;
            }
        }
        Ok(Action::Continuous(ContinuousAction::clipped(a)?))
    };
    let seed = rng.master_seed();
    (0..n)
        .map(|_| rollout(&domain, goal, &mut actor, spec.horizon, rng, counter, seed))
        .collect()
}

/// Final distance to the goal, used by reach sanity checks.
pub fn final_distance(traj: &Trajectory, goal: &[f64; 3]) -> Result<f64> {
    Ok(distance(&traj.final_state.as_reach()?.p, goal))
}

/// First `n_train` trajectories for training, the rest for testing.
pub fn split(demos: Vec<Trajectory>, n_train: usize) -> Result<(Vec<Trajectory>, Vec<Trajectory>)> {
    if n_train > demos.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot take {n_train} training demos from {}",
            demos.len()
        )));
    }
    let mut train = demos;
    let test = train.split_off(n_train);
    Ok((train, test))
}
