use serde::{Deserialize, Serialize};

use crate::{NnError, Result};

/// Adam optimizer state with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    ///
    /// A non-finite gradient leaves both the parameters and the optimizer
    /// state untouched and returns an error.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(NnError::ShapeMismatch {
                what: "adam parameters",
                expected: self.m.len(),
                got: params.len(),
            });
        }
        if grads.len() != self.m.len() {
            return Err(NnError::ShapeMismatch {
                what: "adam gradients",
                expected: self.m.len(),
                got: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite("gradient"));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // m_hat = g and v_hat = g^2 on the first step, so the update is lr * g / (|g| + eps).
        let mut adam = Adam::new(3, 0.01);
        let mut p = vec![1.0, 1.0, 1.0];
        adam.step(&mut p, &[2.5, -0.3, 40.0]).unwrap();
        let expected = [1.0 - 0.01, 1.0 + 0.01, 1.0 - 0.01];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = vec![0.3, -0.7];
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.3, -0.7]);
    }

    #[test]
    fn identical_snapshots_step_identically() {
        let mut a = Adam::new(2, 0.05);
        let mut pa = vec![0.1, 0.2];
        a.step(&mut pa, &[1.0, -1.0]).unwrap();
        let mut b = a.clone();
        let mut pb = pa.clone();
        a.step(&mut pa, &[0.4, 0.9]).unwrap();
        b.step(&mut pb, &[0.4, 0.9]).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = vec![0.0, 0.0];
        assert_eq!(adam.step(&mut p, &[f64::NAN, 1.0]), Err(NnError::NonFinite("gradient")));
        assert_eq!(adam.steps(), 0);
        assert_eq!(p, vec![0.0, 0.0]);
    }
}
