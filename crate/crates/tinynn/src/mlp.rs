use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{NnError, Result};

/// Dense feed-forward network.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs. Its weights are
/// stored input-major (`w[i * out + o]`) followed by `out` biases, so a sparse
/// input (for example a one-hot encoding) only touches the rows it activates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations recorded by [`Mlp::forward_trace`].
///
/// `activations[0]` is the input and the last entry is the network output.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(NnError::TooFewLayers(sizes.len()));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(NnError::EmptyLayer);
    }
    Ok(())
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        check_sizes(sizes)?;
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(NnError::ShapeMismatch {
                what: "parameter vector",
                expected,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NnError::NonFinite("parameters"));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer_offset(&self, layer: usize) -> usize {
        param_count(&self.sizes[..=layer])
    }

    /// Mutable view of layer `layer`'s weights (input-major) and biases.
    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let start = self.layer_offset(layer);
        let (w, rest) = self.params[start..].split_at_mut(n_in * n_out);
        (w, &mut rest[..n_out])
    }

    /// Multiplies the output layer's weights and biases by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.num_layers() - 1;
        let (w, b) = self.layer_mut(last);
        w.iter_mut().chain(b.iter_mut()).for_each(|p| *p *= factor);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.activations.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(x.to_vec());
        let mut offset = 0;
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = &activations[l];
            let mut z = b.to_vec();
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &w[i * n_out..(i + 1) * n_out];
                for (zo, &wio) in z.iter_mut().zip(row) {
                    *zo += xi * wio;
                }
            }
            if l != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(z);
            offset += n_in * n_out + n_out;
        }
        Ok(Trace { activations })
    }

    /// Reverse-mode pass for `output . upstream`.
    ///
    /// Parameter gradients are *added* into `grads` so mini-batches can be
    /// accumulated without extra buffers. Returns the gradient with respect
    /// to the network input.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(NnError::ShapeMismatch {
                what: "upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(NnError::ShapeMismatch {
                what: "gradient buffer",
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        if trace.activations.len() != self.sizes.len() {
            return Err(NnError::ShapeMismatch {
                what: "trace depth",
                expected: self.sizes.len(),
                got: trace.activations.len(),
            });
        }
        let mut delta = upstream.to_vec();
        let last = self.num_layers() - 1;
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l != last {
                // tanh'(z) = 1 - h^2
                for (d, h) in delta.iter_mut().zip(&trace.activations[l + 1]) {
                    *d *= 1.0 - h * h;
                }
            }
            let start = self.layer_offset(l);
            let w = &self.params[start..start + n_in * n_out];
            let (gw, gb) = grads[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (g, d) in gb.iter_mut().zip(&delta) {
                *g += d;
            }
            let input = &trace.activations[l];
            let mut next = vec![0.0; n_in];
            for i in 0..n_in {
                let row = &w[i * n_out..(i + 1) * n_out];
                let xi = input[i];
                if xi != 0.0 {
                    let grow = &mut gw[i * n_out..(i + 1) * n_out];
                    for (g, d) in grow.iter_mut().zip(&delta) {
                        *g += xi * d;
                    }
                }
                next[i] = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
            }
            delta = next;
        }
        Ok(delta)
    }

    /// Convenience wrapper: parameter gradient of `forward(x) . upstream`.
    pub fn gradient(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_trace(x)?;
        let mut grads = vec![0.0; self.params.len()];
        self.backward(&trace, upstream, &mut grads)?;
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_weights_return_bias() {
        let mut net = Mlp::zeros(&[2, 3]).unwrap();
        net.layer_mut(0).1.copy_from_slice(&[0.5, -1.0, 2.0]);
        assert_eq!(net.forward(&[7.0, 9.0]).unwrap(), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn identity_layer_is_identity() {
        let mut net = Mlp::zeros(&[3, 3]).unwrap();
        let (w, _) = net.layer_mut(0);
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let x = [0.25, -4.0, 3.5];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(NnError::ShapeMismatch { .. })));
        assert!(net.gradient(&[1.0, 2.0, 3.0], &[1.0]).is_err());
        assert!(Mlp::zeros(&[3]).is_err());
        assert!(Mlp::from_params(&[2, 2], vec![0.0; 5]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = rand::rng();
        let net = Mlp::new(&[4, 6, 3], &mut rng).unwrap();
        let g = net.gradient(&[0.1, 0.2, -0.3, 0.9], &[0.0; 3]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
