//! Adversarial imitation: GAIL and AIRL.
//!
//! Each round collects fresh policy episodes into a bounded replay buffer,
//! takes a few discriminator steps on balanced expert/policy batches
//! (binary cross-entropy, expert = 1), relabels the fresh episodes with the
//! surrogate reward, and updates the policy with the clipped surrogate.
//!
//! - GAIL: the discriminator logit is a network `z(s, a)`; reward `softplus(z) = -log(1 - D)`.
//! - AIRL: the logit is `f(s, a) - log pi(a|s)`; reward `f(s, a) - log pi(a|s)`.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use tinynn::{Adam, Mlp};

use crate::envs::{ContinuousEnv, DiscreteEnv, InteractionCounter};
use crate::learners::pg::{
    collect_continuous, collect_discrete, ppo_update, td_advantages, Critic, GaussianActor, MlpCritic, PgActor,
    Sample, TableActor, TableCritic,
};
use crate::learners::{check_finite, AdversarialHyper};
use crate::policy::GaussianMlpPolicy;
use crate::rng::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversarialKind {
    Gail,
    Airl,
}

impl AdversarialKind {
    fn name(self) -> &'static str {
        match self {
            AdversarialKind::Gail => "gail",
            AdversarialKind::Airl => "airl",
        }
    }
}

/// How `(state, action)` pairs are fed to the discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Encoding {
    OneHot { num_states: usize, num_actions: usize },
    Concat { obs_scale: f64 },
}

impl Encoding {
    fn input_dim(&self, obs_dim: usize, act_dim: usize) -> usize {
        match self {
            Encoding::OneHot { num_states, num_actions } => num_states + num_actions,
            Encoding::Concat { .. } => obs_dim + act_dim,
        }
    }

    pub fn one_hot(&self, s: usize, a: usize) -> Vec<f64> {
        let Encoding::OneHot { num_states, num_actions } = *self else {
            unreachable!("one_hot on a continuous encoding")
        };
        let mut x = vec![0.0; num_states + num_actions];
        x[s] = 1.0;
        x[num_states + a] = 1.0;
        x
    }

    /// Scaled observation followed by the clipped action.
    pub fn concat(&self, obs: &[f64], act: &[f64]) -> Vec<f64> {
        let Encoding::Concat { obs_scale } = *self else {
            unreachable!("concat on a discrete encoding")
        };
        obs.iter()
            .map(|o| o * obs_scale)
            .chain(act.iter().map(|a| a.clamp(-1.0, 1.0)))
            .collect()
    }
}

/// The learned AIRL reward `f(s, a)`. Every evaluation is counted.
#[derive(Debug)]
pub struct RewardHead {
    pub net: Mlp,
    pub encoding: Encoding,
    calls: AtomicU64,
}

impl RewardHead {
    pub fn new(net: Mlp, encoding: Encoding) -> Self {
        Self {
            net,
            encoding,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reward_discrete(&self, s: usize, a: usize) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.net.forward(&self.encoding.one_hot(s, a))?[0])
    }

    pub fn reward_continuous(&self, obs: &[f64], act: &[f64]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.net.forward(&self.encoding.concat(obs, act))?[0])
    }
}

/// Per-round discriminator accuracy, measured on the freshly collected policy
/// samples (never trained on yet) against the expert set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdversarialStats {
    pub disc_accuracy: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct Game<'a, P: PgActor> {
    kind: AdversarialKind,
    hp: &'a AdversarialHyper,
    disc: Mlp,
    disc_opt: Adam,
    encode: &'a dyn Fn(&P::Obs, &P::Act) -> Vec<f64>,
}

impl<P: PgActor> Game<'_, P> {
    fn logit(&self, actor: &P, obs: &P::Obs, act: &P::Act) -> Result<f64> {
        let f = self.disc.forward(&(self.encode)(obs, act))?[0];
        Ok(match self.kind {
            AdversarialKind::Gail => f,
            AdversarialKind::Airl => f - actor.log_prob(obs, act)?,
        })
    }

    fn reward(&self, actor: &P, obs: &P::Obs, act: &P::Act) -> Result<f64> {
        let z = self.logit(actor, obs, act)?;
        Ok(match self.kind {
            AdversarialKind::Gail => softplus(z),
            AdversarialKind::Airl => z,
        })
    }

    fn disc_step(
        &mut self,
        actor: &P,
        expert: &[(P::Obs, P::Act)],
        replay: &VecDeque<(P::Obs, P::Act)>,
        round: usize,
        rng: &mut RngStream,
    ) -> Result<()> {
        let n = self.hp.demo_batch;
        let mut grads = vec![0.0; self.disc.num_params()];
        let inv = 1.0 / (2 * n) as f64;
        for label in [1.0, 0.0] {
            for _ in 0..n {
                let (obs, act) = if label == 1.0 {
                    &expert[rng.random_range(0..expert.len())]
                } else {
                    &replay[rng.random_range(0..replay.len())]
                };
                let x = (self.encode)(obs, act);
                let trace = self.disc.forward_trace(&x)?;
                let z = match self.kind {
                    AdversarialKind::Gail => trace.output()[0],
                    AdversarialKind::Airl => trace.output()[0] - actor.log_prob(obs, act)?,
                };
                self.disc.backward(&trace, &[inv * (sigmoid(z) - label)], &mut grads)?;
            }
        }
        self.disc_opt
            .step(self.disc.params_mut(), &grads)
            .map_err(|e| Error::Divergence {
                learner: self.kind.name(),
                stage: "round",
                index: round,
                reason: format!("discriminator: {e}"),
            })
    }

    fn accuracy(&self, actor: &P, expert: &[(P::Obs, P::Act)], fresh: &[Sample<P::Obs, P::Act>]) -> Result<f64> {
        let mut e = 0usize;
        for (o, a) in expert {
            e += usize::from(self.logit(actor, o, a)? > 0.0);
        }
        let mut p = 0usize;
        for s in fresh {
            p += usize::from(self.logit(actor, &s.obs, &s.act)? < 0.0);
        }
        Ok(0.5 * (e as f64 / expert.len() as f64 + p as f64 / fresh.len().max(1) as f64))
    }

    #[allow(clippy::too_many_arguments)]
    fn run<C: Critic<P::Obs>>(
        &mut self,
        actor: &mut P,
        critic: &mut C,
        actor_lr: f64,
        expert: &[(P::Obs, P::Act)],
        horizon: usize,
        collect: &mut dyn FnMut(&P, usize, &mut RngStream) -> Result<Vec<Vec<Sample<P::Obs, P::Act>>>>,
        params: &dyn Fn(&P) -> Vec<f64>,
        rng: &mut RngStream,
    ) -> Result<AdversarialStats> {
        if expert.is_empty() {
            return Err(Error::EmptyDemos);
        }
        let mut opt = Adam::new(actor.num_params(), actor_lr);
        let mut replay = VecDeque::with_capacity(self.hp.replay_capacity);
        let episodes = self.hp.replay_capacity.div_ceil(horizon);
        let mut stats = AdversarialStats::default();
        for round in 0..self.hp.rounds {
            let mut samples: Vec<_> = collect(actor, episodes, rng)?.into_iter().flatten().collect();
            for s in &mut samples {
                // Imitation ignores the task's goal signal.
                s.terminal = false;
                s.absorbed = false;
                if replay.len() == self.hp.replay_capacity {
                    replay.pop_front();
                }
                replay.push_back((s.obs.clone(), s.act.clone()));
            }
            stats.disc_accuracy.push(self.accuracy(actor, expert, &samples)?);
            for _ in 0..self.hp.disc_updates_per_round {
                self.disc_step(actor, expert, &replay, round, rng)?;
            }
            check_finite(self.kind.name(), "round", round, self.disc.params())?;
            for s in &mut samples {
                s.reward = self.reward(actor, &s.obs, &s.act)?;
            }
            let (adv, targets) = td_advantages(&samples, critic, self.hp.gamma)?;
            ppo_update(actor, &mut opt, critic, &samples, &adv, &targets, &self.hp.pg, rng).map_err(|e| {
                Error::Divergence {
                    learner: self.kind.name(),
                    stage: "round",
                    index: round,
                    reason: format!("policy: {e}"),
                }
            })?;
            check_finite(self.kind.name(), "round", round, &params(actor))?;
        }
        Ok(stats)
    }
}

fn disc_net(input: usize, hp: &AdversarialHyper, rng: &mut RngStream) -> Result<Mlp> {
    let mut sizes = vec![input];
    sizes.extend(&hp.disc_hidden);
    sizes.push(1);
    Ok(Mlp::new(&sizes, rng)?)
}

/// Output of an adversarial fit: the policy, the discriminator network (the
/// reward head `f` for AIRL) and training statistics.
pub struct AdversarialFit<A> {
    pub actor: A,
    pub reward: RewardHead,
    pub stats: AdversarialStats,
}

/// GAIL or AIRL with a softmax-table policy.
pub fn fit_discrete<E: DiscreteEnv>(
    kind: AdversarialKind,
    env: &E,
    horizon: usize,
    demos: &[Vec<(usize, usize)>],
    hp: &AdversarialHyper,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<AdversarialFit<TableActor>> {
    hp.validate()?;
    let (ns, na) = (env.num_states(), env.num_actions());
    let expert: Vec<(usize, usize)> = demos.iter().flatten().copied().collect();
    if expert.iter().any(|&(s, a)| s >= ns || a >= na) {
        return Err(Error::InvalidParameter("demonstration pair out of range".into()));
    }
    let encoding = Encoding::OneHot {
        num_states: ns,
        num_actions: na,
    };
    let encode = move |s: &usize, a: &usize| encoding.one_hot(*s, *a);
    let disc = disc_net(encoding.input_dim(0, 0), hp, &mut rng.fork("disc"))?;
    let mut game = Game::<TableActor> {
        kind,
        hp,
        disc_opt: Adam::new(disc.num_params(), hp.disc_lr),
        disc,
        encode: &encode,
    };
    let mut actor = TableActor::uniform(ns, na);
    let mut critic = TableCritic {
        values: vec![0.0; ns],
        lr: hp.pg.table_value_lr,
    };
    let mut collect = |a: &TableActor, n: usize, r: &mut RngStream| collect_discrete(env, a, horizon, n, r, counter);
    let stats = game.run(
        &mut actor,
        &mut critic,
        hp.pg.table_lr,
        &expert,
        horizon,
        &mut collect,
        &|a: &TableActor| a.logits.clone(),
        rng,
    )?;
    Ok(AdversarialFit {
        actor,
        reward: RewardHead::new(game.disc, encoding),
        stats,
    })
}

/// GAIL or AIRL with a Gaussian-MLP policy.
pub fn fit_continuous<E: ContinuousEnv>(
    kind: AdversarialKind,
    env: &E,
    horizon: usize,
    demos: &[Vec<(Vec<f64>, Vec<f64>)>],
    hp: &AdversarialHyper,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<AdversarialFit<GaussianMlpPolicy>> {
    hp.validate()?;
    let expert: Vec<(Vec<f64>, Vec<f64>)> = demos.iter().flatten().cloned().collect();
    let encoding = Encoding::Concat {
        obs_scale: hp.pg.obs_scale,
    };
    let encode = move |o: &Vec<f64>, a: &Vec<f64>| encoding.concat(o, a);
    let disc = disc_net(encoding.input_dim(env.obs_dim(), env.act_dim()), hp, &mut rng.fork("disc"))?;
    let mut game = Game::<GaussianActor> {
        kind,
        hp,
        disc_opt: Adam::new(disc.num_params(), hp.disc_lr),
        disc,
        encode: &encode,
    };
    let mut actor = GaussianActor::new(env.obs_dim(), env.act_dim(), &hp.pg, &mut rng.fork("actor"))?;
    let mut critic = MlpCritic::new(env.obs_dim(), &hp.pg, &mut rng.fork("critic"))?;
    let mut collect = |a: &GaussianActor, n: usize, r: &mut RngStream| collect_continuous(env, a, horizon, n, r, counter);
    let stats = game.run(
        &mut actor,
        &mut critic,
        hp.pg.lr,
        &expert,
        horizon,
        &mut collect,
        &|a: &GaussianActor| a.policy.mean_net.params().to_vec(),
        rng,
    )?;
    Ok(AdversarialFit {
        actor: actor.policy,
        reward: RewardHead::new(game.disc, encoding),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Transition;
    use crate::rng::derive_stream;

    struct OneState;

    impl DiscreteEnv for OneState {
        fn num_states(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            2
        }
        fn start(&self) -> usize {
            0
        }
        fn step(&self, _s: usize, _a: usize, _t: u32) -> Result<Transition> {
            Ok(Transition {
                next: 0,
                reward: 0.0,
                done: false,
            })
        }
    }

    fn hp(rounds: usize) -> AdversarialHyper {
        AdversarialHyper {
            rounds,
            ..AdversarialHyper::default()
        }
    }

    fn fit(kind: AdversarialKind, rounds: usize) -> AdversarialFit<TableActor> {
        let demos = vec![vec![(0usize, 0usize); 10]; 7];
        let counter = InteractionCounter::new();
        fit_discrete(kind, &OneState, 10, &demos, &hp(rounds), &mut derive_stream(0, "adv"), &counter).unwrap()
    }

    #[test]
    fn zero_rounds_keep_initialization() {
        for kind in [AdversarialKind::Gail, AdversarialKind::Airl] {
            assert!(fit(kind, 0).actor.logits.iter().all(|l| *l == 0.0));
        }
    }

    #[test]
    fn one_state_expert_is_recovered() {
        for kind in [AdversarialKind::Gail, AdversarialKind::Airl] {
            let out = fit(kind, 100);
            let p = out.actor.probs(0);
            assert!(p[0] >= 0.9, "{kind:?}: {p:?}");
            if kind == AdversarialKind::Airl {
                let f0 = out.reward.reward_discrete(0, 0).unwrap();
                let f1 = out.reward.reward_discrete(0, 1).unwrap();
                assert!(f0 > f1);
            }
        }
    }
}
