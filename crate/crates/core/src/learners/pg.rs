//! Clipped-surrogate policy-gradient machinery shared by PPO, GAIL and AIRL.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use tinynn::{Adam, Mlp};

use crate::envs::{sample_categorical, ContinuousEnv, DiscreteEnv, InteractionCounter};
use crate::learners::PgHyper;
use crate::policy::GaussianMlpPolicy;
use crate::rng::RngStream;
use crate::types::softmax;
use crate::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// A differentiable stochastic policy.
pub trait PgActor {
    type Obs: Clone;
    type Act: Clone;

    fn sample(&self, obs: &Self::Obs, rng: &mut RngStream) -> Result<(Self::Act, f64)>;
    fn log_prob(&self, obs: &Self::Obs, act: &Self::Act) -> Result<f64>;
    /// `grads += coeff * d log pi(act | obs) / d theta`.
    fn add_log_prob_grad(&self, obs: &Self::Obs, act: &Self::Act, coeff: f64, grads: &mut [f64]) -> Result<()>;
    fn num_params(&self) -> usize;
    /// Applies one optimizer step with gradient `grads` (minimization convention).
    fn apply(&mut self, opt: &mut Adam, grads: &[f64]) -> Result<()>;
}

/// Softmax over a logit table: `pi(a|s) = softmax(logits[s])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableActor {
    pub num_actions: usize,
    pub logits: Vec<f64>,
}

impl TableActor {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            logits: vec![0.0; num_states * num_actions],
        }
    }

    pub fn probs(&self, s: usize) -> Vec<f64> {
        softmax(&self.logits[s * self.num_actions..(s + 1) * self.num_actions], 1.0)
    }
}

impl PgActor for TableActor {
    type Obs = usize;
    type Act = usize;

    fn sample(&self, obs: &usize, rng: &mut RngStream) -> Result<(usize, f64)> {
        let p = self.probs(*obs);
        let a = sample_categorical(&p, rng);
        Ok((a, p[a].ln()))
    }

    fn log_prob(&self, obs: &usize, act: &usize) -> Result<f64> {
        Ok(self.probs(*obs)[*act].ln())
    }

    fn add_log_prob_grad(&self, obs: &usize, act: &usize, coeff: f64, grads: &mut [f64]) -> Result<()> {
        let p = self.probs(*obs);
        let row = &mut grads[obs * self.num_actions..(obs + 1) * self.num_actions];
        for (i, (g, pi)) in row.iter_mut().zip(p).enumerate() {
            *g += coeff * (f64::from(u8::from(i == *act)) - pi);
        }
        Ok(())
    }

    fn num_params(&self) -> usize {
        self.logits.len()
    }

    fn apply(&mut self, opt: &mut Adam, grads: &[f64]) -> Result<()> {
        Ok(opt.step(&mut self.logits, grads)?)
    }
}

/// Diagonal Gaussian around an unclipped network mean. The environment clips
/// executed actions; log-probabilities refer to the raw sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActor {
    pub policy: GaussianMlpPolicy,
    pub min_log_scale: f64,
}

impl GaussianActor {
    pub fn new(obs_dim: usize, act_dim: usize, hp: &PgHyper, rng: &mut RngStream) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend(&hp.hidden);
        sizes.push(act_dim);
        let mut net = Mlp::new(&sizes, rng)?;
        // Start close to a zero-mean policy.
        net.scale_output_layer(0.01);
        Ok(Self {
            policy: GaussianMlpPolicy {
                mean_net: net,
                log_scale: vec![hp.init_log_scale; act_dim],
                obs_scale: hp.obs_scale,
            },
            min_log_scale: hp.min_log_scale,
        })
    }
}

impl PgActor for GaussianActor {
    type Obs = Vec<f64>;
    type Act = Vec<f64>;

    fn sample(&self, obs: &Vec<f64>, rng: &mut RngStream) -> Result<(Vec<f64>, f64)> {
        let mean = self.policy.raw_mean(obs)?;
        let a: Vec<f64> = mean
            .iter()
            .zip(&self.policy.log_scale)
            .map(|(m, l)| {
                let z: f64 = StandardNormal.sample(rng);
                m + l.exp() * z
            })
            .collect();
        let lp = self.log_prob(obs, &a)?;
        Ok((a, lp))
    }

    fn log_prob(&self, obs: &Vec<f64>, act: &Vec<f64>) -> Result<f64> {
        let mean = self.policy.raw_mean(obs)?;
        Ok(mean
            .iter()
            .zip(act)
            .zip(&self.policy.log_scale)
            .map(|((m, a), l)| {
                let z = (a - m) / l.exp();
                -0.5 * z * z - l - 0.5 * LN_2PI
            })
            .sum())
    }

    fn add_log_prob_grad(&self, obs: &Vec<f64>, act: &Vec<f64>, coeff: f64, grads: &mut [f64]) -> Result<()> {
        let net = &self.policy.mean_net;
        let trace = net.forward_trace(&self.policy.features(obs))?;
        let n = net.num_params();
        let mut upstream = Vec::with_capacity(act.len());
        for (i, ((m, a), l)) in trace.output().iter().zip(act).zip(&self.policy.log_scale).enumerate() {
            let var = (2.0 * l).exp();
            upstream.push(coeff * (a - m) / var);
            grads[n + i] += coeff * ((a - m).powi(2) / var - 1.0);
        }
        net.backward(&trace, &upstream, &mut grads[..n])?;
        Ok(())
    }

    fn num_params(&self) -> usize {
        self.policy.mean_net.num_params() + self.policy.log_scale.len()
    }

    fn apply(&mut self, opt: &mut Adam, grads: &[f64]) -> Result<()> {
        let n = self.policy.mean_net.num_params();
        let mut flat = self.policy.mean_net.params().to_vec();
        flat.extend(&self.policy.log_scale);
        opt.step(&mut flat, grads)?;
        self.policy.mean_net.params_mut().copy_from_slice(&flat[..n]);
        for (l, v) in self.policy.log_scale.iter_mut().zip(&flat[n..]) {
            *l = v.max(self.min_log_scale);
        }
        Ok(())
    }
}

/// State-value baseline.
pub trait Critic<O> {
    fn value(&self, obs: &O) -> Result<f64>;
    /// One regression step toward `targets`.
    fn fit(&mut self, obs: &[&O], targets: &[f64]) -> Result<()>;
}

/// Tabular values updated by a running average with step size `lr`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCritic {
    pub values: Vec<f64>,
    pub lr: f64,
}

impl Critic<usize> for TableCritic {
    fn value(&self, obs: &usize) -> Result<f64> {
        Ok(self.values[*obs])
    }

    fn fit(&mut self, obs: &[&usize], targets: &[f64]) -> Result<()> {
        for (o, t) in obs.iter().zip(targets) {
            let v = &mut self.values[**o];
            *v += self.lr * (t - *v);
        }
        Ok(())
    }
}

/// Network values trained by Adam on squared error.
#[derive(Debug, Clone)]
pub struct MlpCritic {
    pub net: Mlp,
    pub adam: Adam,
    pub obs_scale: f64,
}

impl MlpCritic {
    pub fn new(obs_dim: usize, hp: &PgHyper, rng: &mut RngStream) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend(&hp.hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, rng)?;
        let adam = Adam::new(net.num_params(), hp.value_lr);
        Ok(Self {
            net,
            adam,
            obs_scale: hp.obs_scale,
        })
    }

    fn features(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter().map(|v| v * self.obs_scale).collect()
    }
}

impl Critic<Vec<f64>> for MlpCritic {
    fn value(&self, obs: &Vec<f64>) -> Result<f64> {
        Ok(self.net.forward(&self.features(obs))?[0])
    }

    fn fit(&mut self, obs: &[&Vec<f64>], targets: &[f64]) -> Result<()> {
        let mut grads = vec![0.0; self.net.num_params()];
        let scale = 2.0 / obs.len().max(1) as f64;
        for (o, t) in obs.iter().zip(targets) {
            let trace = self.net.forward_trace(&self.features(o))?;
            let err = trace.output()[0] - t;
            self.net.backward(&trace, &[scale * err], &mut grads)?;
        }
        Ok(self.adam.step(self.net.params_mut(), &grads)?)
    }
}

/// One environment transition as seen by the learner.
#[derive(Debug, Clone)]
pub struct Sample<O, A> {
    pub obs: O,
    pub act: A,
    pub log_prob: f64,
    pub reward: f64,
    pub next_obs: O,
    /// The goal was entered on this step.
    pub terminal: bool,
    /// The goal had already been entered earlier in the episode.
    pub absorbed: bool,
}

/// Samples `episodes` fixed-horizon episodes from a discrete environment.
pub fn collect_discrete<E: DiscreteEnv>(
    env: &E,
    actor: &TableActor,
    horizon: usize,
    episodes: usize,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<Vec<Vec<Sample<usize, usize>>>> {
    (0..episodes)
        .map(|_| {
            let mut s = env.start();
            let mut absorbed = false;
            let mut ep = Vec::with_capacity(horizon);
            for t in 0..horizon {
                let (a, lp) = actor.sample(&s, rng)?;
                let tr = env.step(s, a, (t + 1) as u32)?;
                ep.push(Sample {
                    obs: s,
                    act: a,
                    log_prob: lp,
                    reward: tr.reward,
                    next_obs: tr.next,
                    terminal: tr.done && !absorbed,
                    absorbed,
                });
                absorbed |= tr.done;
                s = tr.next;
            }
            counter.add(horizon as u64);
            Ok(ep)
        })
        .collect()
}

/// Samples `episodes` fixed-horizon episodes from a continuous environment.
/// `act` holds the raw Gaussian sample; the environment receives it clipped.
pub fn collect_continuous<E: ContinuousEnv>(
    env: &E,
    actor: &GaussianActor,
    horizon: usize,
    episodes: usize,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<Vec<Vec<Sample<Vec<f64>, Vec<f64>>>>> {
    (0..episodes)
        .map(|_| {
            let mut s = env.start();
            let mut ep = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                let (a, lp) = actor.sample(&s, rng)?;
                let clipped: Vec<f64> = a.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
                let (next, reward, _) = env.step(&s, &clipped)?;
                ep.push(Sample {
                    obs: s,
                    act: a,
                    log_prob: lp,
                    reward,
                    next_obs: next.clone(),
                    terminal: false,
                    absorbed: false,
                });
                s = next;
            }
            counter.add(horizon as u64);
            Ok(ep)
        })
        .collect()
}

/// One-step temporal-difference advantages `r + gamma * V(s') - V(s)` and
/// their value targets. Terminal steps do not bootstrap.
pub fn td_advantages<O, A, C: Critic<O>>(samples: &[Sample<O, A>], critic: &C, gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut adv = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    for s in samples {
        let next = if s.terminal { 0.0 } else { critic.value(&s.next_obs)? };
        let target = s.reward + gamma * next;
        adv.push(target - critic.value(&s.obs)?);
        targets.push(target);
    }
    Ok((adv, targets))
}

/// Discounted return-to-go minus `V(s)`, per episode. Returns stop
/// accumulating at the terminal step; absorbed steps get zero.
pub fn return_advantages<O, A, C: Critic<O>>(
    episodes: &[Vec<Sample<O, A>>],
    critic: &C,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut adv = Vec::new();
    let mut targets = Vec::new();
    for ep in episodes {
        let mut returns = vec![0.0; ep.len()];
        let mut g = 0.0;
        for (t, s) in ep.iter().enumerate().rev() {
            if s.absorbed {
                g = 0.0;
                continue;
            }
            g = s.reward + if s.terminal { 0.0 } else { gamma * g };
            returns[t] = g;
        }
        for (s, g) in ep.iter().zip(returns) {
            targets.push(g);
            adv.push(if s.absorbed { 0.0 } else { g - critic.value(&s.obs)? });
        }
    }
    Ok((adv, targets))
}

/// Fraction of minibatch samples whose ratio left the clip interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub clipped_fraction: f64,
    pub samples: usize,
}

/// Clipped-surrogate update of `actor` and regression of `critic`.
///
/// Absorbed samples are skipped. Advantages are standardized over the
/// included samples when `hp.normalize_advantages` is set.
pub fn ppo_update<P, C>(
    actor: &mut P,
    opt: &mut Adam,
    critic: &mut C,
    samples: &[Sample<P::Obs, P::Act>],
    advantages: &[f64],
    targets: &[f64],
    hp: &PgHyper,
    rng: &mut RngStream,
) -> Result<UpdateStats>
where
    P: PgActor,
    C: Critic<P::Obs>,
{
    let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| !samples[i].absorbed).collect();
    if idx.is_empty() {
        return Ok(UpdateStats::default());
    }
    let mut adv = advantages.to_vec();
    if hp.normalize_advantages && idx.len() > 1 {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| adv[i]).sum::<f64>() / n;
        let var = idx.iter().map(|&i| (adv[i] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-8);
        for &i in &idx {
            adv[i] = (adv[i] - mean) / sd;
        }
    }
    let mut grads = vec![0.0; actor.num_params()];
    let (mut clipped, mut seen) = (0usize, 0usize);
    for _ in 0..hp.epochs {
        idx.shuffle(rng);
        for batch in idx.chunks(hp.minibatch) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &samples[i];
                let ratio = (actor.log_prob(&s.obs, &s.act)? - s.log_prob).exp();
                seen += 1;
                let a = adv[i];
                if (a > 0.0 && ratio > 1.0 + hp.clip) || (a < 0.0 && ratio < 1.0 - hp.clip) {
                    clipped += 1;
                    continue;
                }
                actor.add_log_prob_grad(&s.obs, &s.act, -inv * ratio * a, &mut grads)?;
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::InvalidParameter("non-finite policy gradient".into()));
            }
            actor.apply(opt, &grads)?;
            let obs: Vec<&P::Obs> = batch.iter().map(|&i| &samples[i].obs).collect();
            let t: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            critic.fit(&obs, &t)?;
        }
    }
    Ok(UpdateStats {
        clipped_fraction: clipped as f64 / seen.max(1) as f64,
        samples: idx.len(),
    })
}
