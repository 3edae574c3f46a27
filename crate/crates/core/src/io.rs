//! Trajectory files: JSON Lines, one trajectory per line.
//!
//! ```text
//! {"env":"grid","goal":"g_7_1","seed":3,"horizon":50,"steps":[{"s":[1,4,0],"a":[0]},...],"final":[7,1,0]}
//! ```
//!
//! Grid states encode as `[x, y, dir]` and grid actions as `[code]`; reach
//! states as `[px, py, pz]` and reach actions as `[a1, a2, a3]`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Number;

use crate::types::{
    Action, ContinuousAction, DiscreteAction, EnvKind, GridState, ReachState, State, Step, Trajectory,
};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct StepRecord {
    s: Vec<Number>,
    a: Vec<Number>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    env: EnvKind,
    goal: Option<String>,
    seed: u64,
    horizon: usize,
    steps: Vec<StepRecord>,
    #[serde(rename = "final")]
    final_state: Vec<Number>,
}

fn float(v: f64) -> Result<Number> {
    Number::from_f64(v).ok_or_else(|| Error::Format(format!("non-finite value {v}")))
}

fn encode_state(s: &State) -> Result<Vec<Number>> {
    match s {
        State::Grid(g) => Ok(vec![g.x.into(), g.y.into(), g.dir.into()]),
        State::Reach(r) => r.p.iter().map(|v| float(*v)).collect(),
    }
}

fn encode_action(a: &Action) -> Result<Vec<Number>> {
    match a {
        Action::Discrete(d) => Ok(vec![(d.code() as u64).into()]),
        Action::Continuous(c) => c.0.iter().map(|v| float(*v)).collect(),
    }
}

fn ints(v: &[Number], n: usize, what: &str) -> Result<Vec<i64>> {
    if v.len() != n {
        return Err(Error::Format(format!("{what}: expected {n} numbers, got {}", v.len())));
    }
    v.iter()
        .map(|x| {
            x.as_i64()
                .ok_or_else(|| Error::Format(format!("{what}: {x} is not an integer")))
        })
        .collect()
}

fn floats3(v: &[Number], what: &str) -> Result<[f64; 3]> {
    if v.len() != 3 {
        return Err(Error::Format(format!("{what}: expected 3 numbers, got {}", v.len())));
    }
    let mut out = [0.0; 3];
    for (o, x) in out.iter_mut().zip(v) {
        *o = x
            .as_f64()
            .ok_or_else(|| Error::Format(format!("{what}: {x} is not a number")))?;
    }
    Ok(out)
}

fn decode_state(env: EnvKind, v: &[Number]) -> Result<State> {
    match env {
        EnvKind::Grid => {
            let s = ints(v, 3, "grid state")?;
            if !(0..4).contains(&s[2]) {
                return Err(Error::Format(format!("grid direction {} out of range", s[2])));
            }
            Ok(State::Grid(GridState::new(s[0] as i32, s[1] as i32, s[2] as u8)))
        }
        EnvKind::Reach => Ok(State::Reach(ReachState {
            p: floats3(v, "reach state")?,
        })),
    }
}

fn decode_action(env: EnvKind, v: &[Number]) -> Result<Action> {
    match env {
        EnvKind::Grid => {
            let code = ints(v, 1, "grid action")?[0];
            let code = usize::try_from(code).map_err(|_| Error::Format(format!("action code {code}")))?;
            Ok(Action::Discrete(DiscreteAction::from_code(code)?))
        }
        EnvKind::Reach => Ok(Action::Continuous(ContinuousAction(floats3(v, "reach action")?))),
    }
}

/// Encodes one trajectory as a single JSON line (no trailing newline).
pub fn encode_trajectory(t: &Trajectory) -> Result<String> {
    let record = TrajectoryRecord {
        env: t.env,
        goal: t.goal.clone(),
        seed: t.seed,
        horizon: t.horizon,
        steps: t
            .steps
            .iter()
            .map(|s| {
                Ok(StepRecord {
                    s: encode_state(&s.state)?,
                    a: encode_action(&s.action)?,
                })
            })
            .collect::<Result<_>>()?,
        final_state: encode_state(&t.final_state)?,
    };
    Ok(serde_json::to_string(&record)?)
}

pub fn decode_trajectory(line: &str) -> Result<Trajectory> {
    let r: TrajectoryRecord = serde_json::from_str(line)?;
    let steps = r
        .steps
        .iter()
        .map(|s| {
            Ok(Step {
                state: decode_state(r.env, &s.s)?,
                action: decode_action(r.env, &s.a)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if steps.len() != r.horizon {
        return Err(Error::Format(format!(
            "{} steps recorded for horizon {}",
            steps.len(),
            r.horizon
        )));
    }
    Ok(Trajectory {
        steps,
        final_state: decode_state(r.env, &r.final_state)?,
        env: r.env,
        goal: r.goal,
        seed: r.seed,
        horizon: r.horizon,
    })
}

pub fn write_jsonl(path: impl AsRef<Path>, trajectories: &[Trajectory]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for t in trajectories {
        writeln!(out, "{}", encode_trajectory(t)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(decode_trajectory(&line)?);
    }
    Ok(out)
}
