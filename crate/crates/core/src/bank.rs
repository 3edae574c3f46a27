//! Policy banks: one trained policy per candidate goal, plus their on-disk form.
//!
//! A bank directory holds `bank.json` (learner, hyperparameters, seed, and a
//! SHA-256 digest per goal file) and one `{learner}_{goal}.policy` JSON file
//! per goal with a format tag, a shape header, a flat parameter array and a
//! metadata block.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tinynn::Mlp;

use crate::envs::{Domain, GridGoal, GridSpec, GridTask, InteractionCounter, ReachTask};
use crate::learners::adversarial::{fit_continuous, fit_discrete, AdversarialKind, AdversarialStats, RewardHead};
use crate::learners::bc::{bc_fit_mlp, bc_fit_tabular};
use crate::learners::ppo::{ppo_grid, ppo_reach};
use crate::learners::qlearn::qlearn_grid;
use crate::learners::{grid_pairs, reach_pairs, LearnerHyper, LearnerKind};
use crate::policy::{GaussianMlpPolicy, Policy, QPolicy, QTable, TabularPolicy};
use crate::rng::derive_stream;
use crate::types::{ActionDistribution, DemoSet, EnvKind, GoalId, State};
use crate::{Error, Result};

/// Any policy a learner can produce.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedPolicy {
    Tabular(TabularPolicy),
    Q(QPolicy),
    Mlp(GaussianMlpPolicy),
}

impl TrainedPolicy {
    pub fn format_tag(&self) -> &'static str {
        match self {
            TrainedPolicy::Tabular(_) => "tabular",
            TrainedPolicy::Q(_) => "qtable",
            TrainedPolicy::Mlp(_) => "mlp",
        }
    }
}

impl Policy for TrainedPolicy {
    fn distribution(&self, state: &State) -> Result<ActionDistribution> {
        match self {
            TrainedPolicy::Tabular(p) => p.distribution(state),
            TrainedPolicy::Q(p) => p.distribution(state),
            TrainedPolicy::Mlp(p) => p.distribution(state),
        }
    }

    fn env_kind(&self) -> EnvKind {
        match self {
            TrainedPolicy::Tabular(p) => p.env_kind(),
            TrainedPolicy::Q(p) => p.env_kind(),
            TrainedPolicy::Mlp(p) => p.env_kind(),
        }
    }
}

/// One goal's policy and its training record.
#[derive(Debug, Clone)]
pub struct BankEntry {
    pub goal: GoalId,
    pub policy: TrainedPolicy,
    pub train_seconds: f64,
    pub env_calls: u64,
    /// AIRL reward head; kept in memory only.
    pub reward_head: Option<Arc<RewardHead>>,
    pub adversarial: Option<AdversarialStats>,
}

#[derive(Debug, Clone)]
pub struct PolicyBank {
    pub learner: LearnerKind,
    pub env: EnvKind,
    /// The hyperparameter block of `learner`.
    pub hyperparams: Value,
    pub seed: u64,
    pub entries: Vec<BankEntry>,
}

impl PolicyBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn goals(&self) -> Vec<GoalId> {
        self.entries.iter().map(|e| e.goal.clone()).collect()
    }

    pub fn total_env_calls(&self) -> u64 {
        self.entries.iter().map(|e| e.env_calls).sum()
    }

    pub fn total_train_seconds(&self) -> f64 {
        self.entries.iter().map(|e| e.train_seconds).sum()
    }
}

fn hyper_block(kind: LearnerKind, hp: &LearnerHyper) -> Result<Value> {
    Ok(match kind {
        LearnerKind::Bc => serde_json::to_value(&hp.bc)?,
        LearnerKind::Gail => serde_json::to_value(&hp.gail)?,
        LearnerKind::Airl => serde_json::to_value(&hp.airl)?,
        LearnerKind::Qlearn => serde_json::to_value(&hp.qlearn)?,
        LearnerKind::Ppo => serde_json::to_value(&hp.ppo)?,
    })
}

fn train_goal(
    domain: &Domain,
    goal: &GoalId,
    demos: Option<&DemoSet>,
    kind: LearnerKind,
    hp: &LearnerHyper,
    master_seed: u64,
) -> Result<BankEntry> {
    let mut rng = derive_stream(master_seed, &format!("train/{}", goal.label));
    let counter = InteractionCounter::new();
    let started = Instant::now();
    let goal_demos = if kind.uses_demos() {
        let d = demos
            .and_then(|d| d.get(&goal.label))
            .ok_or(Error::EmptyDemos)?;
        if d.is_empty() {
            return Err(Error::EmptyDemos);
        }
        d
    } else {
        &[]
    };
    let mut reward_head = None;
    let mut adversarial = None;
    let policy = match (domain, kind) {
        (Domain::Grid(spec), LearnerKind::Bc) => TrainedPolicy::Tabular(bc_fit_tabular(spec, goal_demos, &hp.bc)?),
        (Domain::Reach(_), LearnerKind::Bc) => TrainedPolicy::Mlp(bc_fit_mlp(goal_demos, &hp.bc, &mut rng)?),
        (Domain::Grid(spec), LearnerKind::Gail | LearnerKind::Airl) => {
            let (adv_kind, adv_hp) = adversarial_setup(kind, hp);
            let task = grid_task(spec, goal)?;
            let pairs = grid_pairs(spec, goal_demos)?;
            let fit = fit_discrete(adv_kind, &task, spec.horizon, &pairs, adv_hp, &mut rng, &counter)?;
            reward_head = Some(Arc::new(fit.reward));
            adversarial = Some(fit.stats);
            TrainedPolicy::Tabular(TabularPolicy::from_logits(spec, &fit.actor.logits)?)
        }
        (Domain::Reach(spec), LearnerKind::Gail | LearnerKind::Airl) => {
            let (adv_kind, adv_hp) = adversarial_setup(kind, hp);
            let task = ReachTask {
                spec: spec.clone(),
                goal: spec.goal_position(&goal.label)?,
            };
            let pairs = reach_pairs(goal_demos)?;
            let fit = fit_continuous(adv_kind, &task, spec.horizon, &pairs, adv_hp, &mut rng, &counter)?;
            reward_head = Some(Arc::new(fit.reward));
            adversarial = Some(fit.stats);
            TrainedPolicy::Mlp(fit.actor)
        }
        (Domain::Grid(spec), LearnerKind::Qlearn) => {
            TrainedPolicy::Q(qlearn_grid(&grid_task(spec, goal)?, &hp.qlearn, &mut rng, &counter)?)
        }
        (Domain::Reach(_), LearnerKind::Qlearn) => {
            return Err(Error::InvalidParameter("qlearn requires the grid domain".into()))
        }
        (Domain::Grid(spec), LearnerKind::Ppo) => {
            TrainedPolicy::Tabular(ppo_grid(&grid_task(spec, goal)?, &hp.ppo, &mut rng, &counter)?)
        }
        (Domain::Reach(spec), LearnerKind::Ppo) => {
            let task = ReachTask {
                spec: spec.clone(),
                goal: spec.goal_position(&goal.label)?,
            };
            TrainedPolicy::Mlp(ppo_reach(&task, &hp.ppo, &mut rng, &counter)?)
        }
    };
    Ok(BankEntry {
        goal: goal.clone(),
        policy,
        train_seconds: started.elapsed().as_secs_f64(),
        env_calls: counter.get(),
        reward_head,
        adversarial,
    })
}

fn adversarial_setup(kind: LearnerKind, hp: &LearnerHyper) -> (AdversarialKind, &crate::learners::AdversarialHyper) {
    if kind == LearnerKind::Gail {
        (AdversarialKind::Gail, &hp.gail)
    } else {
        (AdversarialKind::Airl, &hp.airl)
    }
}

fn grid_task(spec: &GridSpec, goal: &GoalId) -> Result<GridTask> {
    let g = GridGoal::parse(&goal.label)?;
    spec.validate_goal(g)?;
    Ok(GridTask {
        spec: spec.clone(),
        goal: g,
    })
}

/// Trains one policy per goal, each from the stream `"train/{goal}"`.
///
/// Results do not depend on `parallel`. Training interactions are added to
/// `counter`. The first failing goal aborts the bank and is named in the error.
pub fn train_bank(
    domain: &Domain,
    goals: &[GoalId],
    demos: Option<&DemoSet>,
    kind: LearnerKind,
    hp: &LearnerHyper,
    master_seed: u64,
    parallel: bool,
    counter: &InteractionCounter,
) -> Result<PolicyBank> {
    if goals.is_empty() {
        return Err(Error::EmptyBank);
    }
    hp.validate()?;
    let train = |g: &GoalId| {
        train_goal(domain, g, demos, kind, hp, master_seed).map_err(|e| Error::GoalTraining {
            goal: g.label.clone(),
            source: Box::new(e),
        })
    };
    let entries: Vec<BankEntry> = if parallel {
        goals.par_iter().map(train).collect::<Result<_>>()?
    } else {
        goals.iter().map(train).collect::<Result<_>>()?
    };
    counter.add(entries.iter().map(|e| e.env_calls).sum());
    Ok(PolicyBank {
        learner: kind,
        env: domain.kind(),
        hyperparams: hyper_block(kind, hp)?,
        seed: master_seed,
        entries,
    })
}

pub const MANIFEST: &str = "bank.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    shape: Vec<usize>,
    params: Vec<f64>,
    meta: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    learner: LearnerKind,
    env: EnvKind,
    seed: u64,
    hyperparams: Value,
    goals: Vec<ManifestGoal>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestGoal {
    index: usize,
    label: String,
    file: String,
    sha256: String,
    train_seconds: f64,
    env_calls: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TabularMeta {
    grid: GridSpec,
    seen: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QMeta {
    grid: GridSpec,
    temperature: f64,
    visits: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MlpMeta {
    obs_scale: f64,
    act_dim: usize,
}

pub fn policy_file_name(learner: LearnerKind, goal: &str) -> String {
    format!("{learner}_{goal}.policy")
}

fn encode_policy(policy: &TrainedPolicy) -> Result<PolicyFile> {
    Ok(match policy {
        TrainedPolicy::Tabular(p) => PolicyFile {
            format: "tabular".into(),
            shape: vec![p.seen.len(), p.probs.len() / p.seen.len().max(1)],
            params: p.probs.clone(),
            meta: serde_json::to_value(TabularMeta {
                grid: p.grid.clone(),
                seen: p.seen.clone(),
            })?,
        },
        TrainedPolicy::Q(p) => PolicyFile {
            format: "qtable".into(),
            shape: vec![p.grid.num_states(), p.table.q.len() / p.grid.num_states()],
            params: p.table.q.clone(),
            meta: serde_json::to_value(QMeta {
                grid: p.grid.clone(),
                temperature: p.temperature,
                visits: p.table.visits.clone(),
            })?,
        },
        TrainedPolicy::Mlp(p) => {
            let mut params = p.mean_net.params().to_vec();
            params.extend(&p.log_scale);
            PolicyFile {
                format: "mlp".into(),
                shape: p.mean_net.sizes().to_vec(),
                params,
                meta: serde_json::to_value(MlpMeta {
                    obs_scale: p.obs_scale,
                    act_dim: p.log_scale.len(),
                })?,
            }
        }
    })
}

fn decode_policy(file: &str, f: PolicyFile) -> Result<TrainedPolicy> {
    let corrupt = |reason: String| Error::Corrupt {
        file: file.to_owned(),
        reason,
    };
    let meta_err = |e: serde_json::Error| corrupt(format!("metadata: {e}"));
    let check_table = |grid: &GridSpec, len: usize| -> Result<()> {
        let want = [grid.num_states(), 4];
        if f.shape != want || len != want[0] * want[1] {
            return Err(corrupt(format!("shape {:?} with {len} params, want {want:?}", f.shape)));
        }
        Ok(())
    };
    match f.format.as_str() {
        "tabular" => {
            let meta: TabularMeta = serde_json::from_value(f.meta.clone()).map_err(meta_err)?;
            check_table(&meta.grid, f.params.len())?;
            if meta.seen.len() != meta.grid.num_states() {
                return Err(corrupt("seen mask length".into()));
            }
            for row in f.params.chunks(4) {
                ActionDistribution::discrete(row.to_vec()).map_err(|e| corrupt(e.to_string()))?;
            }
            Ok(TrainedPolicy::Tabular(TabularPolicy {
                grid: meta.grid,
                probs: f.params,
                seen: meta.seen,
            }))
        }
        "qtable" => {
            let meta: QMeta = serde_json::from_value(f.meta.clone()).map_err(meta_err)?;
            check_table(&meta.grid, f.params.len())?;
            if meta.visits.len() != f.params.len() {
                return Err(corrupt("visit table length".into()));
            }
            Ok(TrainedPolicy::Q(QPolicy {
                grid: meta.grid,
                table: QTable {
                    q: f.params,
                    visits: meta.visits,
                },
                temperature: meta.temperature,
            }))
        }
        "mlp" => {
            let meta: MlpMeta = serde_json::from_value(f.meta.clone()).map_err(meta_err)?;
            if f.shape.last() != Some(&meta.act_dim) || f.params.len() < meta.act_dim {
                return Err(corrupt("output size does not match the scale vector".into()));
            }
            let mut params = f.params;
            let log_scale = params.split_off(params.len() - meta.act_dim);
            let mean_net = Mlp::from_params(&f.shape, params).map_err(|e| corrupt(e.to_string()))?;
            Ok(TrainedPolicy::Mlp(GaussianMlpPolicy {
                mean_net,
                log_scale,
                obs_scale: meta.obs_scale,
            }))
        }
        other => Err(Error::UnknownFormat(other.to_owned())),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the bank into `dir` (created if missing). The manifest is written last.
pub fn save_bank(bank: &PolicyBank, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut goals = Vec::with_capacity(bank.entries.len());
    for e in &bank.entries {
        let file = policy_file_name(bank.learner, &e.goal.label);
        let mut meta = serde_json::Map::new();
        let encoded = encode_policy(&e.policy)?;
        meta.insert("policy".into(), encoded.meta);
        meta.insert("learner".into(), serde_json::to_value(bank.learner)?);
        meta.insert("hyperparams".into(), bank.hyperparams.clone());
        meta.insert("seed".into(), bank.seed.into());
        meta.insert("goal".into(), serde_json::to_value(&e.goal)?);
        meta.insert("train_seconds".into(), e.train_seconds.into());
        let body = PolicyFile {
            meta: Value::Object(meta),
            ..encoded
        };
        let bytes = serde_json::to_vec(&body)?;
        fs::write(dir.join(&file), &bytes)?;
        goals.push(ManifestGoal {
            index: e.goal.index,
            label: e.goal.label.clone(),
            file,
            sha256: sha256_hex(&bytes),
            train_seconds: e.train_seconds,
            env_calls: e.env_calls,
        });
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        learner: bank.learner,
        env: bank.env,
        seed: bank.seed,
        hyperparams: bank.hyperparams.clone(),
        goals,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// Loads a bank written by [`save_bank`]. Every goal file is verified before
/// anything is returned.
pub fn load_bank(dir: impl AsRef<Path>) -> Result<PolicyBank> {
    let dir = dir.as_ref();
    let manifest_bytes = fs::read(dir.join(MANIFEST))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes).map_err(|e| Error::Corrupt {
        file: MANIFEST.into(),
        reason: e.to_string(),
    })?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::UnknownFormat(format!("bank version {}", manifest.version)));
    }
    if manifest.goals.is_empty() {
        return Err(Error::EmptyBank);
    }
    let mut entries = Vec::with_capacity(manifest.goals.len());
    for g in &manifest.goals {
        let path = dir.join(&g.file);
        if !path.is_file() {
            return Err(Error::MissingGoalFile {
                goal: g.label.clone(),
                file: g.file.clone(),
            });
        }
        let bytes = fs::read(&path)?;
        if sha256_hex(&bytes) != g.sha256 {
            return Err(Error::Corrupt {
                file: g.file.clone(),
                reason: "digest mismatch".into(),
            });
        }
        let mut body: PolicyFile = serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
            file: g.file.clone(),
            reason: e.to_string(),
        })?;
        body.meta = body.meta.get("policy").cloned().unwrap_or(Value::Null);
        entries.push(BankEntry {
            goal: GoalId::new(g.index, g.label.clone()),
            policy: decode_policy(&g.file, body)?,
            train_seconds: g.train_seconds,
            env_calls: g.env_calls,
            reward_head: None,
            adversarial: None,
        });
    }
    Ok(PolicyBank {
        learner: manifest.learner,
        env: manifest.env,
        hyperparams: manifest.hyperparams,
        seed: manifest.seed,
        entries,
    })
}
