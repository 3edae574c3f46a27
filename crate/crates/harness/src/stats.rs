//! Classification metrics and seed-level summary statistics.

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Multiclass scores over a closed goal set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Micro F1; equals accuracy for single-label predictions.
    pub micro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 (0/0 counts as 0), macro-averaged over
/// every class in `goals` whether or not it occurs.
pub fn classification_metrics<G: PartialEq + std::fmt::Debug>(pairs: &[(G, G)], goals: &[G]) -> Result<ClassMetrics> {
    ensure!(!pairs.is_empty(), "no predictions to score");
    ensure!(!goals.is_empty(), "empty goal set");
    let class = |g: &G| goals.iter().position(|c| c == g);
    let k = goals.len();
    let (mut tp, mut fp, mut fnn) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    let mut correct = 0;
    for (truth, pred) in pairs {
        let (Some(t), Some(p)) = (class(truth), class(pred)) else {
            bail!("prediction pair ({truth:?}, {pred:?}) falls outside the goal set");
        };
        if t == p {
            tp[t] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fnn[t] += 1;
        }
    }
    let mut sums = [0.0; 3];
    for c in 0..k {
        let precision = ratio(tp[c], tp[c] + fp[c]);
        let recall = ratio(tp[c], tp[c] + fnn[c]);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        sums[0] += precision;
        sums[1] += recall;
        sums[2] += f1;
    }
    let accuracy = ratio(correct, pairs.len());
    Ok(ClassMetrics {
        accuracy,
        macro_precision: sums[0] / k as f64,
        macro_recall: sums[1] / k as f64,
        macro_f1: sums[2] / k as f64,
        micro_f1: accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Mean, sample std and a two-sided 95% t interval. One value gives a
/// zero-width interval at the value.
pub fn aggregate_stats(values: &[f64]) -> StatSummary {
    let n = values.len();
    if n == 0 {
        return StatSummary {
            mean: f64::NAN,
            std: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            n,
        };
    }
    // Shifted by the first value: identical inputs give exactly that value and zero spread.
    let anchor = values[0];
    let mean = anchor + values.iter().map(|v| v - anchor).sum::<f64>() / n as f64;
    if n == 1 {
        return StatSummary {
            mean,
            std: 0.0,
            ci_low: mean,
            ci_high: mean,
            n,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let half = t_quantile_975(n - 1) * std / (n as f64).sqrt();
    StatSummary {
        mean,
        std,
        ci_low: mean - half,
        ci_high: mean + half,
        n,
    }
}

/// 0.975 quantile of Student's t with `dof` degrees of freedom.
pub fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}
