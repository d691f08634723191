//! Adaptive per-parameter optimizer (Adam with bias correction).

use super::DiffTensor;
use crate::error::{Error, Result};

/// Adam optimizer. After every update the parameter values are rounded
/// to the f32 grid so that checkpoints reproduce inference bit-exactly.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, moments: Vec::new() }
    }

    /// Apply one update from the accumulated gradients, then zero them.
    pub fn step(&mut self, params: &mut [&mut DiffTensor]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params.iter().map(|p| (vec![0.0; p.len()], vec![0.0; p.len()])).collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::Param("optimizer bound to a different parameter set".into()));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (p, (m, v)) in params.iter_mut().zip(&mut self.moments) {
            if p.len() != m.len() {
                return Err(Error::Param("parameter shape changed under optimizer".into()));
            }
            for i in 0..p.values.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let update = self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
                p.values[i] = (p.values[i] - update) as f32 as f64;
            }
            p.zero_grad();
        }
        Ok(())
    }
}
