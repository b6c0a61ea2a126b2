//! The ENN interface and its concrete architectures.
//!
//! An epistemic neural network is a function `f(params, x, z)` of an input
//! `x` and an epistemic index `z`, together with a fixed reference
//! distribution over `z`. Concrete models here:
//!
//! - [`MlpEnn`] — a plain MLP; ignores the index entirely.
//! - [`Ensemble`] — K particles, index = particle id, uniform reference.
//! - [`EnsemblePlus`] — ensemble particles each offset by a frozen, scaled
//!   prior network.
//! - [`DropoutMlp`] — index = dropout mask over hidden units, Bernoulli
//!   reference, inverted scaling.
//! - [`Hypermodel`] — effective parameters affine in the index,
//!   `theta(z) = zeta + eta^T z`, plus an optional frozen prior hypermodel.
//! - [`BbbCast`] — `f_{mu + sigma .* z}(x)` with a standard Gaussian index
//!   per parameter; a demonstration-quality cast, not a tuned variational
//!   agent.
//! - [`Epinet`] — a small additive network `sigma(sg[phi(x)], z)` on top of a
//!   base MLP, split into a learnable head and a frozen prior ensemble.
//!
//! Gradients honor two structural rules throughout: no gradient flows from
//! the additive head into the base network through the feature input
//! (stop-gradient), and frozen prior parameters receive exactly zero
//! gradient.

mod bbb;
mod dropout;
mod ensemble;
mod epinet;
mod hypermodel;
mod mlp_model;

pub use bbb::BbbCast;
pub use dropout::DropoutMlp;
pub use ensemble::{Ensemble, EnsemblePlus};
pub use epinet::Epinet;
pub use hypermodel::Hypermodel;
pub use mlp_model::MlpEnn;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{MlpArch, NumericsError, ParamStore, StreamKey, ViewId};

/// Errors from model construction and evaluation.
#[derive(Debug, Error)]
pub enum EnnError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("epistemic index does not match the model reference: expected {expected}, got {got}")]
    IndexMismatch { expected: String, got: String },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

/// Reference distribution for the epistemic index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReferenceDistribution {
    /// i.i.d. standard normal vector of the given dimension.
    Gaussian { dim: usize },
    /// Uniform over particle ids `0..count`.
    Uniform { count: usize },
    /// i.i.d. Bernoulli(keep_prob) 0/1 mask over hidden units.
    BernoulliMask { units: usize, keep_prob: f64 },
}

impl ReferenceDistribution {
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> EpistemicIndex {
        match *self {
            ReferenceDistribution::Gaussian { dim } => {
                let v = (0..dim)
                    .map(|_| rng.sample(rand_distr::StandardNormal))
                    .collect();
                EpistemicIndex::Vector(v)
            }
            ReferenceDistribution::Uniform { count } => {
                EpistemicIndex::Particle(rng.random_range(0..count))
            }
            ReferenceDistribution::BernoulliMask { units, keep_prob } => {
                let v = (0..units)
                    .map(|_| if rng.random_bool(keep_prob) { 1.0 } else { 0.0 })
                    .collect();
                EpistemicIndex::Vector(v)
            }
        }
    }

    /// All indices, for references with finite support (uniform only).
    pub fn enumerate(&self) -> Option<Vec<EpistemicIndex>> {
        match *self {
            ReferenceDistribution::Uniform { count } => {
                Some((0..count).map(EpistemicIndex::Particle).collect())
            }
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            ReferenceDistribution::Gaussian { dim } => format!("gaussian(dim={dim})"),
            ReferenceDistribution::Uniform { count } => format!("uniform(count={count})"),
            ReferenceDistribution::BernoulliMask { units, keep_prob } => {
                format!("bernoulli_mask(units={units}, keep_prob={keep_prob})")
            }
        }
    }

    pub fn matches(&self, z: &EpistemicIndex) -> bool {
        match (self, z) {
            (ReferenceDistribution::Gaussian { dim }, EpistemicIndex::Vector(v)) => {
                v.len() == *dim
            }
            (ReferenceDistribution::Uniform { count }, EpistemicIndex::Particle(k)) => k < count,
            (ReferenceDistribution::BernoulliMask { units, .. }, EpistemicIndex::Vector(v)) => {
                v.len() == *units
            }
            _ => false,
        }
    }
}

/// One epistemic index value.
#[derive(Clone, Debug, PartialEq)]
pub enum EpistemicIndex {
    Vector(Vec<f64>),
    Particle(usize),
}

impl EpistemicIndex {
    pub fn describe(&self) -> String {
        match self {
            EpistemicIndex::Vector(v) => format!("vector(len={})", v.len()),
            EpistemicIndex::Particle(k) => format!("particle({k})"),
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            EpistemicIndex::Vector(v) => Some(v),
            EpistemicIndex::Particle(_) => None,
        }
    }
}

/// Construction descriptor for every model kind; this is what checkpoints
/// store and rebuild from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Mlp {
        arch: MlpArch,
    },
    Ensemble {
        arch: MlpArch,
        particles: usize,
    },
    EnsemblePlus {
        arch: MlpArch,
        prior_arch: MlpArch,
        particles: usize,
        prior_scale: f64,
    },
    Dropout {
        arch: MlpArch,
        rate: f64,
    },
    Hypermodel {
        arch: MlpArch,
        index_dim: usize,
        prior_scale: f64,
    },
    BbbCast {
        arch: MlpArch,
    },
    Epinet {
        base: MlpArch,
        g_hidden: Vec<usize>,
        prior_hidden: Vec<usize>,
        index_dim: usize,
        prior_scale: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn Enn>, EnnError> {
        Ok(match self.clone() {
            ModelSpec::Mlp { arch } => Box::new(MlpEnn::new(arch)),
            ModelSpec::Ensemble { arch, particles } => Box::new(Ensemble::new(arch, particles)?),
            ModelSpec::EnsemblePlus {
                arch,
                prior_arch,
                particles,
                prior_scale,
            } => Box::new(EnsemblePlus::new(arch, prior_arch, particles, prior_scale)?),
            ModelSpec::Dropout { arch, rate } => Box::new(DropoutMlp::new(arch, rate)?),
            ModelSpec::Hypermodel {
                arch,
                index_dim,
                prior_scale,
            } => Box::new(Hypermodel::new(arch, index_dim, prior_scale)?),
            ModelSpec::BbbCast { arch } => Box::new(BbbCast::new(arch)),
            ModelSpec::Epinet {
                base,
                g_hidden,
                prior_hidden,
                index_dim,
                prior_scale,
            } => Box::new(Epinet::new(
                base,
                g_hidden,
                prior_hidden,
                index_dim,
                prior_scale,
            )?),
        })
    }
}

/// An epistemic neural network: a deterministic map `(params, x, z) ->
/// logits` plus the declared index reference distribution.
///
/// `forward` is pure; repeated calls with identical arguments agree bitwise.
/// `backward` accumulates the gradient of `upstream . logits` into a store
/// with the model's layout, honoring stop-gradients and frozen views.
pub trait Enn: Send + Sync {
    fn input_dim(&self) -> usize;

    /// Output (logit) dimension, `C`.
    fn output_dim(&self) -> usize;

    fn reference(&self) -> &ReferenceDistribution;

    /// Fresh parameter store with this model's layout and initial values.
    fn init_params(&self, key: StreamKey) -> ParamStore;

    fn forward(
        &self,
        params: &ParamStore,
        x: &[f64],
        z: &EpistemicIndex,
    ) -> Result<Vec<f64>, EnnError>;

    fn backward(
        &self,
        params: &ParamStore,
        x: &[f64],
        z: &EpistemicIndex,
        upstream: &[f64],
        grad: &mut ParamStore,
    ) -> Result<(), EnnError>;

    /// Forward over many indices for one input. Models override this to
    /// share index-independent work (base network, prior tables).
    fn forward_many(
        &self,
        params: &ParamStore,
        x: &[f64],
        zs: &[EpistemicIndex],
    ) -> Result<Vec<Vec<f64>>, EnnError> {
        zs.iter().map(|z| self.forward(params, x, z)).collect()
    }

    /// Backward over many indices for one input, one upstream per index.
    fn backward_many(
        &self,
        params: &ParamStore,
        x: &[f64],
        zs: &[EpistemicIndex],
        upstreams: &[Vec<f64>],
        grad: &mut ParamStore,
    ) -> Result<(), EnnError> {
        for (z, u) in zs.iter().zip(upstreams) {
            self.backward(params, x, z, u, grad)?;
        }
        Ok(())
    }

    fn descriptor(&self) -> ModelSpec;

    /// Raw additive-prior output `p(x, z)` before normalization and before
    /// the prior scale multiplier; `None` for models without a prior.
    fn raw_prior_output(
        &self,
        _params: &ParamStore,
        _x: &[f64],
        _z: &EpistemicIndex,
    ) -> Result<Option<Vec<f64>>, EnnError> {
        Ok(None)
    }

    /// View ids of the prior-normalization `(shift, scale)` vectors.
    fn prior_norm_views(&self) -> Option<(ViewId, ViewId)> {
        None
    }

    /// Floating-point operations for one `(x, z)` forward, as a crude
    /// compute proxy (2 ops per multiply-accumulate).
    fn flops_per_forward(&self) -> u64;
}

pub(crate) fn check_index(
    reference: &ReferenceDistribution,
    z: &EpistemicIndex,
) -> Result<(), EnnError> {
    if reference.matches(z) {
        Ok(())
    } else {
        Err(EnnError::IndexMismatch {
            expected: reference.describe(),
            got: z.describe(),
        })
    }
}

/// Applies the frozen prior normalization and scale:
/// `out[c] += prior_scale * (raw[c] + shift[c]) * scale[c]`.
pub(crate) fn add_scaled_prior(
    out: &mut [f64],
    raw: &[f64],
    shift: &[f64],
    scale: &[f64],
    prior_scale: f64,
) {
    for c in 0..out.len() {
        out[c] += prior_scale * (raw[c] + shift[c]) * scale[c];
    }
}

pub(crate) fn arch_flops(arch: &MlpArch) -> u64 {
    let macs: usize = arch.layer_dims().into_iter().map(|(fi, fo)| fi * fo).sum();
    2 * macs as u64
}
