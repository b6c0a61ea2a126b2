//! Dense numeric kernels: matrices, parameter stores, MLP forward/backward,
//! first-order optimizers, and seedable RNG streams.
//!
//! All models in this crate are compositions of affine + ReLU blocks,
//! concatenations, dot products, and index-weighted sums, so backpropagation
//! is written layer-wise with closed-form adjoints rather than through a
//! general autodiff graph.

mod matrix;
mod mlp;
mod optim;
mod params;
mod rng;

pub use matrix::Matrix;
pub use mlp::{
    mlp_backward, mlp_backward_masked, mlp_forward, mlp_forward_masked, Activation, MlpArch,
    MlpTape,
};
pub use optim::{OptimizerKind, OptimizerState};
pub use params::{ParamStore, ParamStoreBuilder, ViewId, ViewShape, ViewSpec};
pub use rng::StreamKey;

use thiserror::Error;

/// Errors from the numeric kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("tape does not match architecture at layer {layer}")]
    StaleTape { layer: usize },
    #[error("non-finite gradient entry {value} at flat index {index}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("optimizer state holds {state_len} moments but params have {param_len} entries")]
    OptimizerLayout { state_len: usize, param_len: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
}
