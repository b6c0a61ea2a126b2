//! Fully-connected MLP forward and exact reverse-mode backward passes.
//!
//! Parameter layout for an architecture `input -> hidden... -> output` is,
//! per layer: weight matrix `W` (fan_out x fan_in, row-major) followed by the
//! bias vector `b`. Hidden layers apply ReLU; the output layer is linear.
//!
//! The forward pass can apply a per-unit multiplier on each hidden layer
//! (post-activation), which is how dropout masks enter; the backward pass
//! mirrors it exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::dot;
use super::{NumericsError, StreamKey};

/// Hidden-layer activation. ReLU's derivative at exactly 0 is taken to be 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
}

/// MLP architecture descriptor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        assert!(input_dim >= 1 && output_dim >= 1, "dims must be >= 1");
        assert!(hidden.iter().all(|&h| h >= 1), "hidden widths must be >= 1");
        MlpArch {
            input_dim,
            hidden,
            output_dim,
            activation: Activation::Relu,
        }
    }

    /// `(fan_in, fan_out)` for each affine layer, in forward order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .into_iter()
            .map(|(fi, fo)| (fi + 1) * fo)
            .sum()
    }

    /// Width of the last hidden layer, if any.
    pub fn last_hidden_width(&self) -> Option<usize> {
        self.hidden.last().copied()
    }

    /// Total hidden units across all hidden layers.
    pub fn total_hidden_units(&self) -> usize {
        self.hidden.iter().sum()
    }

    /// Glorot-uniform weights, zero biases, drawn deterministically from
    /// `key`. Weight entries are drawn row-major, layer by layer.
    pub fn init_glorot(&self, key: StreamKey) -> Vec<f64> {
        let mut rng = key.rng();
        let mut params = Vec::with_capacity(self.param_count());
        for (fan_in, fan_out) in self.layer_dims() {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.random_range(-a..a));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        params
    }

    fn check_params(&self, params: &[f64], context: &str) -> Result<(), NumericsError> {
        if params.len() != self.param_count() {
            return Err(NumericsError::Dimension {
                context: context.into(),
                expected: self.param_count(),
                got: params.len(),
            });
        }
        Ok(())
    }
}

/// Activation cache from a forward pass, sufficient for one backward pass.
#[derive(Clone, Debug)]
pub struct MlpTape {
    input: Vec<f64>,
    /// Pre-activations per affine layer (including the output layer).
    pre: Vec<Vec<f64>>,
    /// Post-activations per hidden layer, after any mask multiplier.
    post: Vec<Vec<f64>>,
}

impl MlpTape {
    /// Post-activation of the last hidden layer (epinet feature source).
    pub fn last_hidden(&self) -> Option<&[f64]> {
        self.post.last().map(Vec::as_slice)
    }

    fn check(&self, arch: &MlpArch) -> Result<(), NumericsError> {
        if self.input.len() != arch.input_dim || self.pre.len() != arch.hidden.len() + 1 {
            return Err(NumericsError::StaleTape { layer: 0 });
        }
        for (l, (_, fan_out)) in arch.layer_dims().into_iter().enumerate() {
            if self.pre[l].len() != fan_out {
                return Err(NumericsError::StaleTape { layer: l });
            }
        }
        Ok(())
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], fan_in: usize, fan_out: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(fan_out);
    for o in 0..fan_out {
        out.push(dot(&w[o * fan_in..(o + 1) * fan_in], x) + b[o]);
    }
    out
}

/// Forward pass returning the output and the activation tape.
pub fn mlp_forward(
    arch: &MlpArch,
    params: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, MlpTape), NumericsError> {
    mlp_forward_masked(arch, params, x, None)
}

/// Forward pass with per-unit multipliers on each hidden layer
/// (post-activation). `masks` must hold one slice per hidden layer.
pub fn mlp_forward_masked(
    arch: &MlpArch,
    params: &[f64],
    x: &[f64],
    masks: Option<&[&[f64]]>,
) -> Result<(Vec<f64>, MlpTape), NumericsError> {
    arch.check_params(params, "mlp_forward")?;
    if x.len() != arch.input_dim {
        return Err(NumericsError::Dimension {
            context: "mlp_forward input".into(),
            expected: arch.input_dim,
            got: x.len(),
        });
    }
    if let Some(m) = masks {
        if m.len() != arch.hidden.len() {
            return Err(NumericsError::Dimension {
                context: "mlp_forward masks".into(),
                expected: arch.hidden.len(),
                got: m.len(),
            });
        }
    }

    let dims = arch.layer_dims();
    let n_layers = dims.len();
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(arch.hidden.len());
    let mut offset = 0;
    let mut act: &[f64] = x;
    let mut out = Vec::new();

    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = &params[offset..offset + fan_in * fan_out];
        let b = &params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        offset += (fan_in + 1) * fan_out;

        let z = affine(w, b, act, fan_in, fan_out);
        if l + 1 == n_layers {
            out = z.clone();
            pre.push(z);
        } else {
            let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            if let Some(m) = masks {
                if m[l].len() != fan_out {
                    return Err(NumericsError::Dimension {
                        context: format!("mlp_forward mask layer {l}"),
                        expected: fan_out,
                        got: m[l].len(),
                    });
                }
                for (ai, &mi) in a.iter_mut().zip(m[l]) {
                    *ai *= mi;
                }
            }
            pre.push(z);
            post.push(a);
            act = post.last().unwrap();
        }
    }

    Ok((
        out,
        MlpTape {
            input: x.to_vec(),
            pre,
            post,
        },
    ))
}

/// Backward pass: gradient of `upstream . output` with respect to every
/// parameter, in the same layout as `params`. The gradient is accumulated
/// into `grad_out` (callers zero it or sum over a batch).
pub fn mlp_backward(
    arch: &MlpArch,
    params: &[f64],
    tape: &MlpTape,
    upstream: &[f64],
    grad_out: &mut [f64],
) -> Result<(), NumericsError> {
    mlp_backward_masked(arch, params, tape, upstream, None, grad_out)
}

/// Backward pass mirroring [`mlp_forward_masked`].
pub fn mlp_backward_masked(
    arch: &MlpArch,
    params: &[f64],
    tape: &MlpTape,
    upstream: &[f64],
    masks: Option<&[&[f64]]>,
    grad_out: &mut [f64],
) -> Result<(), NumericsError> {
    arch.check_params(params, "mlp_backward")?;
    arch.check_params(grad_out, "mlp_backward grad")?;
    tape.check(arch)?;
    if upstream.len() != arch.output_dim {
        return Err(NumericsError::Dimension {
            context: "mlp_backward upstream".into(),
            expected: arch.output_dim,
            got: upstream.len(),
        });
    }

    let dims = arch.layer_dims();
    // Flat offsets of each layer, last to first.
    let mut offsets = Vec::with_capacity(dims.len());
    let mut offset = 0;
    for &(fan_in, fan_out) in &dims {
        offsets.push(offset);
        offset += (fan_in + 1) * fan_out;
    }

    let mut g: Vec<f64> = upstream.to_vec();
    for l in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[l];
        let off = offsets[l];
        let is_output = l + 1 == dims.len();

        if !is_output {
            // g currently holds dL/d(post-activation of layer l).
            let z = &tape.pre[l];
            for (i, gi) in g.iter_mut().enumerate() {
                if let Some(m) = masks {
                    *gi *= m[l][i];
                }
                // ReLU subgradient: 0 at exactly 0.
                if z[i] <= 0.0 {
                    *gi = 0.0;
                }
            }
        }

        let act_in: &[f64] = if l == 0 { &tape.input } else { &tape.post[l - 1] };
        let (gw, gb) = grad_out[off..off + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
        for o in 0..fan_out {
            let go = g[o];
            if go != 0.0 {
                let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                for (r, &a) in row.iter_mut().zip(act_in) {
                    *r += go * a;
                }
            }
            gb[o] += go;
        }

        if l > 0 {
            let w = &params[off..off + fan_in * fan_out];
            let mut g_prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let go = g[o];
                if go != 0.0 {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    for (gp, &wi) in g_prev.iter_mut().zip(row) {
                        *gp += go * wi;
                    }
                }
            }
            g = g_prev;
        }
    }

    Ok(())
}
