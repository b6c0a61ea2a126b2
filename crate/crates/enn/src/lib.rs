//! Epistemic neural networks (ENNs) at desk scale.
//!
//! An ENN is a model whose forward map `f(params, x, z)` depends on an input
//! `x` and an *epistemic index* `z` drawn from a fixed reference distribution.
//! Variation of the output with `z` expresses uncertainty that could be
//! resolved by more data, which is exactly what joint predictions across
//! several inputs need and what plain marginal predictions cannot capture.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`] — dense matrix/vector kernels, MLP forward/backward with
//!   exact reverse-mode gradients, SGD/Adam, and seedable RNG streams.
//! - [`model`] — the [`model::Enn`] trait plus the concrete architectures:
//!   plain MLP, deep ensemble, ensemble with additive frozen priors, dropout,
//!   linear hypermodel, a Bayes-by-backprop style cast, and the epinet.
//! - [`train`] — index-integrated losses (cross-entropy / MSE, optional
//!   Gaussian bootstrap perturbation), ridge regularization, minibatch
//!   gradients, and the training loop.
//! - [`eval`] — marginal and joint predictive distributions, log-loss
//!   metrics, dyadic batch sampling, and an exact finite-hypothesis Bayes
//!   oracle for ground-truth joint predictions.
//! - [`checkpoint`] — bit-exact model save/load in a length-prefixed
//!   sectioned container.
//!
//! Everything is `f64` and deterministic given a seed.

pub mod checkpoint;
pub mod dataset;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod train;

pub use dataset::{LabeledDataset, Labels, Target};
pub use model::{Enn, EnnError, EpistemicIndex, ReferenceDistribution};
pub use numerics::{
    Activation, Matrix, MlpArch, OptimizerKind, OptimizerState, ParamStore, StreamKey,
};
