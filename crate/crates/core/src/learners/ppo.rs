//! PPO on the environment's true reward.

use tinynn::Adam;

use crate::envs::{ContinuousEnv, DiscreteEnv, GridTask, InteractionCounter, ReachTask};
use crate::learners::pg::{
    collect_continuous, collect_discrete, ppo_update, return_advantages, GaussianActor, MlpCritic, TableActor,
    TableCritic,
};
use crate::learners::{check_finite, PpoHyper};
use crate::policy::{GaussianMlpPolicy, TabularPolicy};
use crate::rng::RngStream;
use crate::Result;

/// Softmax-table PPO. Advantages are discounted returns-to-go minus a tabular
/// baseline; steps after the goal was entered are left out of the update.
pub fn ppo_discrete<E: DiscreteEnv>(
    env: &E,
    horizon: usize,
    hp: &PpoHyper,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<TableActor> {
    hp.validate()?;
    let mut actor = TableActor::uniform(env.num_states(), env.num_actions());
    let mut critic = TableCritic {
        values: vec![0.0; env.num_states()],
        lr: hp.pg.table_value_lr,
    };
    let mut opt = Adam::new(actor.logits.len(), hp.pg.table_lr);
    for it in 0..hp.iterations {
        let episodes = collect_discrete(env, &actor, horizon, hp.episodes_per_iteration, rng, counter)?;
        let (adv, targets) = return_advantages(&episodes, &critic, hp.gamma)?;
        let samples: Vec<_> = episodes.into_iter().flatten().collect();
        ppo_update(&mut actor, &mut opt, &mut critic, &samples, &adv, &targets, &hp.pg, rng)?;
        check_finite("ppo", "iteration", it, &actor.logits)?;
    }
    Ok(actor)
}

/// Gaussian-MLP PPO with a network value baseline.
pub fn ppo_continuous<E: ContinuousEnv>(
    env: &E,
    horizon: usize,
    hp: &PpoHyper,
    rng: &mut RngStream,
    counter: &InteractionCounter,
) -> Result<GaussianMlpPolicy> {
    hp.validate()?;
    let mut actor = GaussianActor::new(env.obs_dim(), env.act_dim(), &hp.pg, &mut rng.fork("actor"))?;
    let mut critic = MlpCritic::new(env.obs_dim(), &hp.pg, &mut rng.fork("critic"))?;
    let mut opt = Adam::new(actor.policy.mean_net.num_params() + env.act_dim(), hp.pg.lr);
    for it in 0..hp.iterations {
        let episodes = collect_continuous(env, &actor, horizon, hp.episodes_per_iteration, rng, counter)?;
        let (adv, targets) = return_advantages(&episodes, &critic, hp.gamma)?;
        let samples: Vec<_> = episodes.into_iter().flatten().collect();
        ppo_update(&mut actor, &mut opt, &mut critic, &samples, &adv, &targets, &hp.pg, rng)?;
        check_finite("ppo", "iteration", it, actor.policy.mean_net.params())?;
    }
    Ok(actor.policy)
}

pub fn ppo_grid(task: &GridTask, hp: &PpoHyper, rng: &mut RngStream, counter: &InteractionCounter) -> Result<TabularPolicy> {
    let actor = ppo_discrete(task, task.spec.horizon, hp, rng, counter)?;
    TabularPolicy::from_logits(&task.spec, &actor.logits)
}

pub fn ppo_reach(task: &ReachTask, hp: &PpoHyper, rng: &mut RngStream, counter: &InteractionCounter) -> Result<GaussianMlpPolicy> {
    ppo_continuous(task, task.spec.horizon, hp, rng, counter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{GridGoal, GridSpec, ReachSpec};
    use crate::rng::derive_stream;

    #[test]
    fn zero_iterations_keep_initialization() {
        let hp = PpoHyper {
            iterations: 0,
            ..PpoHyper::default()
        };
        let task = GridTask { spec: GridSpec::default(), goal: GridGoal::new(7, 1) };
        let counter = InteractionCounter::new();
        let actor = ppo_discrete(&task, 50, &hp, &mut derive_stream(0, "p"), &counter).unwrap();
        assert!(actor.logits.iter().all(|l| *l == 0.0));
        assert_eq!(counter.get(), 0);
        let reach = ReachTask { spec: ReachSpec::default(), goal: [0.2, 0.2, 0.2] };
        let a = ppo_continuous(&reach, 50, &hp, &mut derive_stream(0, "p"), &counter).unwrap();
        let b = GaussianActor::new(3, 3, &hp.pg, &mut derive_stream(0, "p").fork("actor")).unwrap();
        assert_eq!(a, b.policy);
    }
}
