//! First-order optimizers over flat parameter vectors.

use serde::{Deserialize, Serialize};

use super::{NumericsError, ParamStore};

/// Update rule and its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    SgdMomentum { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    /// Adam with the usual defaults and the given learning rate.
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::SgdMomentum { lr, momentum: 0.0 }
    }
}

/// Per-parameter moment buffers plus the step counter.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step_count: u64,
    /// First moment (Adam) or velocity (SGD momentum).
    m: Vec<f64>,
    /// Second moment; empty for SGD.
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, param_len: usize) -> Self {
        let v = match kind {
            OptimizerKind::Adam { .. } => vec![0.0; param_len],
            OptimizerKind::SgdMomentum { .. } => Vec::new(),
        };
        OptimizerState {
            kind,
            step_count: 0,
            m: vec![0.0; param_len],
            v,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update. Fails fast on non-finite gradient entries without
    /// touching the parameters.
    pub fn step(&mut self, params: &mut ParamStore, grad: &ParamStore) -> Result<(), NumericsError> {
        if self.m.len() != params.len() {
            return Err(NumericsError::OptimizerLayout {
                state_len: self.m.len(),
                param_len: params.len(),
            });
        }
        if grad.len() != params.len() {
            return Err(NumericsError::OptimizerLayout {
                state_len: grad.len(),
                param_len: params.len(),
            });
        }
        if let Some((index, &value)) = grad.flat().iter().enumerate().find(|(_, g)| !g.is_finite())
        {
            return Err(NumericsError::NonFiniteGradient { index, value });
        }

        self.step_count += 1;
        let g = grad.flat();
        let p = params.flat_mut();
        match self.kind {
            OptimizerKind::SgdMomentum { lr, momentum } => {
                for i in 0..p.len() {
                    self.m[i] = momentum * self.m[i] + g[i];
                    p[i] -= lr * self.m[i];
                }
            }
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for i in 0..p.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
