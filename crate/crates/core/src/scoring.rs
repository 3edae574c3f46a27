//! Goal-agnostic scores of an observed prefix under a policy. Higher is more
//! plausible; every score is at most 0.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::policy::Policy;
use crate::rng::RngStream;
use crate::types::{Action, ActionDistribution, Step};
use crate::{Error, Result};

/// Argument order of the KL score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(pi_g || pi_O)`.
    PolicyObserved,
    /// `KL(pi_O || pi_g)`.
    ObservedPolicy,
}

impl KlDirection {
    fn as_str(self) -> &'static str {
        match self {
            KlDirection::PolicyObserved => "policy||observed",
            KlDirection::ObservedPolicy => "observed||policy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    NegMse,
    NegKl { eps: f64, direction: KlDirection },
    NegW1 { samples: usize },
}

impl MetricKind {
    pub const DEFAULT_KL_EPS: f64 = 0.01;
    pub const DEFAULT_W1_SAMPLES: usize = 16;

    pub fn mse() -> Self {
        MetricKind::NegMse
    }

    pub fn kl() -> Self {
        MetricKind::NegKl {
            eps: Self::DEFAULT_KL_EPS,
            direction: KlDirection::PolicyObserved,
        }
    }

    pub fn w1() -> Self {
        MetricKind::NegW1 {
            samples: Self::DEFAULT_W1_SAMPLES,
        }
    }

    /// Short name: `neg_mse`, `neg_kl` or `neg_w1`.
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::NegMse => "neg_mse",
            MetricKind::NegKl { .. } => "neg_kl",
            MetricKind::NegW1 { .. } => "neg_w1",
        }
    }
}

/// Name with parameters, as written to result files.
impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::NegMse => f.write_str("neg_mse"),
            MetricKind::NegKl { eps, direction } => write!(f, "neg_kl(eps={eps},dir={})", direction.as_str()),
            MetricKind::NegW1 { samples } => write!(f, "neg_w1(m={samples})"),
        }
    }
}

/// Accepts `mse`, `kl`, `w1` (defaults) or the `neg_` forms.
impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("neg_").unwrap_or(s) {
            "mse" => Ok(Self::mse()),
            "kl" => Ok(Self::kl()),
            "w1" => Ok(Self::w1()),
            _ => Err(Error::InvalidParameter(format!("unknown metric {s:?}"))),
        }
    }
}

fn check_prefix(prefix: &[Step]) -> Result<()> {
    if prefix.is_empty() {
        Err(Error::EmptyPrefix)
    } else {
        Ok(())
    }
}

fn distribution(policy: &dyn Policy, step: &Step) -> Result<ActionDistribution> {
    policy.distribution(&step.state)
}

fn discrete_code(step: &Step, n: usize) -> Result<usize> {
    let code = step.action.as_discrete()?.code();
    if code >= n {
        return Err(Error::InvalidAction(format!("action code {code} outside {n} actions")));
    }
    Ok(code)
}

fn continuous(step: &Step) -> Result<[f64; 3]> {
    match step.action {
        Action::Continuous(c) => Ok(c.0),
        Action::Discrete(_) => Err(Error::InvalidAction("expected a continuous action".into())),
    }
}

/// `-(1/T) * sum_t |pi_g(s_t) - a_t|^2`, with one-hot `a_t` for discrete
/// actions and the (clipped) policy mean for continuous policies.
pub fn score_mse(prefix: &[Step], policy: &dyn Policy) -> Result<f64> {
    check_prefix(prefix)?;
    let mut total = 0.0;
    for step in prefix {
        total += match distribution(policy, step)? {
            ActionDistribution::Discrete(p) => {
                let a = discrete_code(step, p.len())?;
                p.iter()
                    .enumerate()
                    .map(|(i, pi)| (pi - if i == a { 1.0 } else { 0.0 }).powi(2))
                    .sum::<f64>()
            }
            ActionDistribution::Gaussian { mean, .. } => {
                let a = continuous(step)?;
                mean.iter().zip(a).map(|(m, x)| (m - x).powi(2)).sum()
            }
        };
    }
    Ok(-total / prefix.len() as f64)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(pi, qi)| if *pi == 0.0 { 0.0 } else { pi * (pi / qi).ln() })
        .sum()
}

/// `-sum_t KL` between the policy and a smoothed pseudo-policy that puts
/// `1 - eps * (|A| - 1)` on the observed action and `eps` elsewhere.
pub fn score_kl(prefix: &[Step], policy: &dyn Policy, eps: f64, direction: KlDirection) -> Result<f64> {
    check_prefix(prefix)?;
    let mut total = 0.0;
    for step in prefix {
        let p = match distribution(policy, step)? {
            ActionDistribution::Discrete(p) => p,
            other => {
                return Err(Error::UnsupportedMetric {
                    metric: "neg_kl".into(),
                    policy: other.kind_name().into(),
                })
            }
        };
        let n = p.len();
        if !(eps > 0.0 && eps < 1.0 / n as f64) {
            return Err(Error::InvalidParameter(format!("kl eps {eps} must lie in (0, 1/{n})")));
        }
        let a = discrete_code(step, n)?;
        let pseudo: Vec<f64> = (0..n)
            .map(|i| if i == a { 1.0 - eps * (n - 1) as f64 } else { eps })
            .collect();
        total += match direction {
            KlDirection::PolicyObserved => kl(&p, &pseudo),
            KlDirection::ObservedPolicy => kl(&pseudo, &p),
        };
    }
    Ok(-total)
}

/// `-(1/T) * sum_t c_t` where `c_t` is the 1-Wasserstein distance between the
/// observed action and the policy. Discrete: `2 * (1 - pi(a_t|s_t))` under the
/// L1-between-one-hots ground metric. Continuous: mean L1 distance to
/// `samples` clipped policy draws.
pub fn score_w1(prefix: &[Step], policy: &dyn Policy, samples: usize, rng: &mut RngStream) -> Result<f64> {
    check_prefix(prefix)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("w1 sample count must be >= 1".into()));
    }
    let mut total = 0.0;
    for step in prefix {
        total += match distribution(policy, step)? {
            ActionDistribution::Discrete(p) => {
                let a = discrete_code(step, p.len())?;
                2.0 * (1.0 - p[a])
            }
            ActionDistribution::Gaussian { mean, scale } => {
                let a = continuous(step)?;
                let mut cost = 0.0;
                for _ in 0..samples {
                    for ((m, s), x) in mean.iter().zip(&scale).zip(a) {
                        let z: f64 = StandardNormal.sample(rng);
                        cost += ((m + s * z).clamp(-1.0, 1.0) - x).abs();
                    }
                }
                cost / samples as f64
            }
        };
    }
    Ok(-total / prefix.len() as f64)
}

/// Dispatches on `metric`. Only `neg_w1` draws from `rng`.
pub fn score(metric: &MetricKind, prefix: &[Step], policy: &dyn Policy, rng: &mut RngStream) -> Result<f64> {
    match *metric {
        MetricKind::NegMse => score_mse(prefix, policy),
        MetricKind::NegKl { eps, direction } => score_kl(prefix, policy, eps, direction),
        MetricKind::NegW1 { samples } => score_w1(prefix, policy, samples, rng),
    }
}
