//! Tabular Q-learning with epsilon-greedy exploration.

use rand::Rng;

use crate::envs::{DiscreteEnv, GridSpec, GridTask, InteractionCounter};
use crate::learners::QLearnHyper;
use crate::policy::{QPolicy, QTable};
use crate::rng::RngStream;
use crate::Result;

/// Uniformly random index among the maxima of `row`.
fn greedy<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..row.len()).filter(|&i| row[i] == best).collect();
    ties[rng.random_range(0..ties.len())]
}

/// Runs `hp.episodes` episodes of `horizon` steps from the start state.
///
/// Entering the goal is terminal for the update (no bootstrap). The episode
/// still runs to the horizon so every episode contributes exactly `horizon`
/// visits, but steps after the goal was entered are not learned from.
pub fn qlearn<E: DiscreteEnv>(
    env: &E,
    horizon: usize,
    hp: &QLearnHyper,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<QTable> {
    hp.validate()?;
    let na = env.num_actions();
    let mut table = QTable::zeros(env.num_states(), na);
    for _ in 0..hp.episodes {
        let mut s = env.start();
        let mut absorbed = false;
        for t in 0..horizon {
            let a = if rng.random_bool(hp.epsilon) {
                rng.random_range(0..na)
            } else {
                greedy(&table.q[s * na..(s + 1) * na], rng)
            };
            let tr = env.step(s, a, (t + 1) as u32)?;
            table.visits[s * na + a] += 1;
            if !absorbed {
                let target = if tr.done {
                    tr.reward
                } else {
                    let next = &table.q[tr.next * na..(tr.next + 1) * na];
                    tr.reward + hp.gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                };
                let q = &mut table.q[s * na + a];
                *q += hp.alpha * (target - *q);
                absorbed = tr.done;
            }
            s = tr.next;
        }
        counter.add(horizon as u64);
    }
    Ok(table)
}

/// Q-learning on the grid, returning the Boltzmann policy over the learned table.
pub fn qlearn_grid(
    task: &GridTask,
    hp: &QLearnHyper,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<QPolicy> {
    let table = qlearn(task, task.spec.horizon, hp, rng, counter)?;
    Ok(QPolicy {
        grid: task.spec.clone(),
        table,
        temperature: hp.temperature,
    })
}

/// Visits per free cell, summed over headings and actions, in state-index order.
pub fn position_visits(grid: &GridSpec, table: &QTable) -> Vec<((i32, i32), u64)> {
    let mut out: Vec<((i32, i32), u64)> = Vec::new();
    for i in 0..grid.num_states() {
        let s = grid.state_at(i);
        if !grid.is_valid(&s) {
            continue;
        }
        let v = table.state_visits(i, 4);
        match out.iter_mut().find(|(p, _)| *p == s.pos()) {
            Some((_, total)) => *total += v,
            None => out.push((s.pos(), v)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{GridGoal, Transition};
    use crate::rng::derive_stream;
    use crate::types::DiscreteAction;

    struct Bandit;

    impl DiscreteEnv for Bandit {
        fn num_states(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            4
        }
        fn start(&self) -> usize {
            0
        }
        fn step(&self, _s: usize, a: usize, _t: u32) -> Result<Transition> {
            Ok(Transition {
                next: 0,
                reward: if a == 2 { 1.0 } else { 0.0 },
                done: true,
            })
        }
    }

    #[test]
    fn bandit_converges_to_rewards() {
        let hp = QLearnHyper {
            episodes: 5000,
            ..QLearnHyper::default()
        };
        let counter = InteractionCounter::new();
        let t = qlearn(&Bandit, 1, &hp, &mut derive_stream(0, "q"), &counter).unwrap();
        for (q, want) in t.q.iter().zip([0.0, 0.0, 1.0, 0.0]) {
            assert!((q - want).abs() < 0.01, "{:?}", t.q);
        }
        assert_eq!(t.total_visits(), 5000);
        assert_eq!(counter.get(), 5000);
    }

    #[test]
    fn grid_greedy_path_is_shortest() {
        let spec = GridSpec::default();
        let task = GridTask { spec: spec.clone(), goal: GridGoal::new(7, 1) };
        let counter = InteractionCounter::new();
        let pol = qlearn_grid(&task, &QLearnHyper::default(), &mut derive_stream(3, "train/g_7_1"), &counter).unwrap();
        assert_eq!(pol.table.total_visits(), 20_000 * 50);
        assert_eq!(counter.get(), 20_000 * 50);
        let mut s = spec.start;
        let mut steps = 0;
        while s.pos() != (7, 1) && steps < 50 {
            let i = spec.index(&s);
            let row = &pol.table.q[i * 4..i * 4 + 4];
            let a = crate::envs::argmax(row);
            s = spec.transition(&s, DiscreteAction::from_code(a).unwrap());
            steps += 1;
        }
        assert_eq!(steps, 11);
    }
}
