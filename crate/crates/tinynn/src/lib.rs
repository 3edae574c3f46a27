//! Minimal multilayer perceptrons for policy, value and discriminator heads.
//!
//! Networks are dense, use `tanh` on every hidden layer and the identity on
//! the output layer. Parameters live in one flat `f64` buffer so optimizers
//! and serializers can treat a network as a plain vector. Gradients are
//! derived by hand per layer; there is no general autograd.

mod adam;
mod mlp;

pub use adam::Adam;
pub use mlp::{Mlp, Trace};

/// Errors raised by network evaluation and optimization.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("network needs at least an input and an output layer, got {0} sizes")]
    TooFewLayers(usize),
    #[error("layer sizes must be positive")]
    EmptyLayer,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, NnError>;
