//! Behavioral cloning: count-based for finite state spaces, regression for reach.

use rand::seq::SliceRandom;
use tinynn::{Adam, Mlp};

use crate::envs::GridSpec;
use crate::learners::{grid_pairs, reach_pairs, BcHyper};
use crate::policy::{GaussianMlpPolicy, TabularPolicy};
use crate::rng::RngStream;
use crate::types::Trajectory;
use crate::{Error, Result};

/// Laplace-smoothed action frequencies:
/// `pi(a|s) = (count(s,a) + alpha) / (count(s) + alpha * num_actions)`.
///
/// Returns row-major probabilities and a per-state seen flag. Unseen states
/// get the uniform distribution.
pub fn fit_counts(
    pairs: &[Vec<(usize, usize)>],
    num_states: usize,
    num_actions: usize,
    alpha: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if pairs.iter().all(|t| t.is_empty()) {
        return Err(Error::EmptyDemos);
    }
    let mut counts = vec![0.0; num_states * num_actions];
    let mut seen = vec![false; num_states];
    for &(s, a) in pairs.iter().flatten() {
        if s >= num_states || a >= num_actions {
            return Err(Error::InvalidParameter(format!("pair ({s}, {a}) out of range")));
        }
        counts[s * num_actions + a] += 1.0;
        seen[s] = true;
    }
    let probs = counts
        .chunks(num_actions)
        .flat_map(|row| {
            let n: f64 = row.iter().sum();
            row.iter()
                .map(move |c| (c + alpha) / (n + alpha * num_actions as f64))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok((probs, seen))
}

/// Tabular BC over grid demonstrations.
pub fn bc_fit_tabular(grid: &GridSpec, demos: &[Trajectory], hp: &BcHyper) -> Result<TabularPolicy> {
    if demos.is_empty() {
        return Err(Error::EmptyDemos);
    }
    let pairs = grid_pairs(grid, demos)?;
    let (probs, seen) = fit_counts(&pairs, grid.num_states(), 4, hp.alpha)?;
    Ok(TabularPolicy {
        grid: grid.clone(),
        probs,
        seen,
    })
}

/// Mean-squared-error regression of actions on observations.
///
/// After training, the per-dimension log-scale is set to the log of the
/// residual standard deviation on the training set (floored at `min_scale`).
pub fn fit_regression(
    samples: &[(Vec<f64>, Vec<f64>)],
    hp: &BcHyper,
    rng: &mut RngStream,
) -> Result<GaussianMlpPolicy> {
    let Some((obs0, act0)) = samples.first() else {
        return Err(Error::EmptyDemos);
    };
    let (obs_dim, act_dim) = (obs0.len(), act0.len());
    let mut sizes = vec![obs_dim];
    sizes.extend(&hp.hidden);
    sizes.push(act_dim);
    let mut policy = GaussianMlpPolicy {
        mean_net: Mlp::new(&sizes, rng)?,
        log_scale: vec![0.0; act_dim],
        obs_scale: hp.obs_scale,
    };
    let features: Vec<Vec<f64>> = samples.iter().map(|(o, _)| policy.features(o)).collect();
    let mut adam = Adam::new(policy.mean_net.num_params(), hp.lr);
    let mut grads = vec![0.0; policy.mean_net.num_params()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..hp.epochs {
        order.shuffle(rng);
        let mut loss = 0.0;
        for batch in order.chunks(hp.batch) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / (batch.len() * act_dim) as f64;
            for &i in batch {
                let trace = policy.mean_net.forward_trace(&features[i])?;
                let upstream: Vec<f64> = trace
                    .output()
                    .iter()
                    .zip(&samples[i].1)
                    .map(|(y, a)| {
                        loss += (y - a).powi(2);
                        scale * (y - a)
                    })
                    .collect();
                policy.mean_net.backward(&trace, &upstream, &mut grads)?;
            }
            adam.step(policy.mean_net.params_mut(), &grads).map_err(|e| Error::Divergence {
                learner: "bc",
                stage: "epoch",
                index: epoch,
                reason: e.to_string(),
            })?;
        }
        if !loss.is_finite() {
            return Err(Error::Divergence {
                learner: "bc",
                stage: "epoch",
                index: epoch,
                reason: "non-finite loss".into(),
            });
        }
    }
    let mut sq = vec![0.0; act_dim];
    for (f, (_, a)) in features.iter().zip(samples) {
        for ((s, y), t) in sq.iter_mut().zip(policy.mean_net.forward(f)?).zip(a) {
            *s += (y - t).powi(2);
        }
    }
    policy.log_scale = sq
        .iter()
        .map(|s| (s / samples.len() as f64).sqrt().max(hp.min_scale).ln())
        .collect();
    Ok(policy)
}

/// Gaussian-MLP BC over reach demonstrations.
pub fn bc_fit_mlp(demos: &[Trajectory], hp: &BcHyper, rng: &mut RngStream) -> Result<GaussianMlpPolicy> {
    let samples: Vec<_> = reach_pairs(demos)?.into_iter().flatten().collect();
    fit_regression(&samples, hp, rng)
}
