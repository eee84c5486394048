//! Parameter update rules: SGD with a cosine learning-rate schedule, and Adam.

use serde::{Deserialize, Serialize};

use super::{NumericError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    /// lr(t) = lr0 * 0.5 * (1 + cos(pi * t / T)), t advanced once per epoch.
    SgdCosine { base_lr: f64, total_epochs: usize },
    Adam(AdamParams),
}

/// Optimizer with per-parameter state; moments are allocated lazily to match
/// the parameter shapes on first use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step_count: u64,
    epoch: usize,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimizerState {
    pub fn sgd_cosine(base_lr: f64, total_epochs: usize) -> Self {
        OptimizerState {
            kind: OptimizerKind::SgdCosine {
                base_lr,
                total_epochs,
            },
            step_count: 0,
            epoch: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn adam(params: AdamParams) -> Self {
        OptimizerState {
            kind: OptimizerKind::Adam(params),
            step_count: 0,
            epoch: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Sets the schedule position; only affects the cosine learning rate.
    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn learning_rate(&self) -> f64 {
        match &self.kind {
            OptimizerKind::SgdCosine {
                base_lr,
                total_epochs,
            } => {
                let t = self.epoch.min(*total_epochs) as f64;
                let total = (*total_epochs).max(1) as f64;
                base_lr * 0.5 * (1.0 + (std::f64::consts::PI * t / total).cos())
            }
            OptimizerKind::Adam(p) => p.lr,
        }
    }

    /// Applies one update in place. Parameter and gradient lists must match
    /// position by position and shape by shape.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), NumericError> {
        if params.len() != grads.len() {
            return Err(NumericError::ShapeMismatch {
                expected: vec![params.len()],
                actual: vec![grads.len()],
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(NumericError::ShapeMismatch {
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(NumericError::NonFiniteLoss);
            }
        }
        self.step_count += 1;
        match self.kind.clone() {
            OptimizerKind::SgdCosine { .. } => {
                let lr = self.learning_rate();
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam(a) => {
                if self.m.is_empty() {
                    self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
                    self.v = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
                }
                let t = self.step_count as i32;
                let bc1 = 1.0 - a.beta1.powi(t);
                let bc2 = 1.0 - a.beta2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    for (((pv, gv), mv), vv) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mv = a.beta1 * *mv + (1.0 - a.beta1) * gv;
                        *vv = a.beta2 * *vv + (1.0 - a.beta2) * gv * gv;
                        let m_hat = *mv / bc1;
                        let v_hat = *vv / bc2;
                        *pv -= a.lr * m_hat / (v_hat.sqrt() + a.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
