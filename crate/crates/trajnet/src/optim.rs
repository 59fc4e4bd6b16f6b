//! Adam with bias-corrected moment estimates.
//!
//! The update is the textbook form: per parameter `p` with gradient `g`,
//!
//! ```text
//! m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
//! m_hat = m / (1 - b1^t)        v_hat = v / (1 - b2^t)
//! p <- p - lr * m_hat / (sqrt(v_hat) + eps)
//! ```
//!
//! so on the first step with a constant gradient of 1 and `lr = 0.1`, every
//! parameter moves by `-0.1 / (1 + eps)`.

use serde::{Deserialize, Serialize};

use crate::tensor::{Tensor, TensorError};

/// Optimizer hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    /// Standard moment decays (0.9 / 0.999) and epsilon 1e-8 at the given
    /// learning rate.
    pub fn with_learning_rate(learning_rate: f64) -> AdamConfig {
        AdamConfig { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl Default for AdamConfig {
    fn default() -> AdamConfig {
        AdamConfig::with_learning_rate(1e-4)
    }
}

/// First/second moment buffers, one pair per parameter tensor, plus the step
/// counter. The buffers are plain `f64` vectors so a checkpoint can persist
/// the optimizer bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zeroed state for parameters of the given element counts.
    pub fn new(lens: &[usize]) -> AdamState {
        AdamState {
            step: 0,
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Applies one Adam update to every parameter tensor in place. The
    /// gradient list must be parallel to the parameter list, entry for entry.
    pub fn step(
        &mut self,
        cfg: &AdamConfig,
        params: &mut [&mut Tensor],
        grads: &[Vec<f64>],
    ) -> Result<(), TensorError> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(TensorError::ListLength { expected: params.len(), got: grads.len() });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (i, param) in params.iter_mut().enumerate() {
            if grads[i].len() != param.len() {
                return Err(TensorError::ListLength { expected: param.len(), got: grads[i].len() });
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, p) in param.data_mut().iter_mut().enumerate() {
                let g = grads[i][j];
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}
