//! Adam optimizer and the step learning-rate schedule.

use crate::error::{Error, Result};

use super::tensor::Param;

/// Adam hyperparameters. Defaults: β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam over a fixed parameter list.
///
/// Moment buffers are laid out by position on the first step; every later
/// step must present the same parameters in the same order. `step`
/// consumes the accumulated gradients and zeroes them afterwards.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Adam {
        Adam {
            cfg,
            step_count: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update: p ← p − lr · m̂ / (√v̂ + ε) with bias-corrected moments.
    pub fn step(&mut self, params: &mut [&mut Param], lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArg(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len()
            || params
                .iter()
                .zip(&self.m)
                .any(|(p, m)| p.value.len() != m.len())
        {
            return Err(Error::Shape(
                "optimizer state does not match the parameter list".into(),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            p.grad.assert_finite(&format!("gradient of {}", p.name()))?;
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for ((pv, &g), (mi, vi)) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *pv -= lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
            p.value.assert_finite(&format!("value of {}", p.name()))?;
            p.zero_grad();
        }
        Ok(())
    }
}

/// Step schedule: `base · decay^floor(epoch / every)`.
///
/// With the defaults (base 0.001, decay 0.1, every 10): epochs 0–9 run at
/// 1e-3, epochs 10–19 at 1e-4, epochs 20–29 at 1e-5.
pub fn lr_at(epoch: usize, base: f64, decay: f64, every: usize) -> f64 {
    base * decay.powi((epoch / every) as i32)
}
