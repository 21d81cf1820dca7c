//! Mixup augmentation: convex combinations of training pairs.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};

/// Mixup settings. `beta_shape` is the `a` of Beta(a, a); the default 1.0
/// makes α uniform on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixupConfig {
    pub enabled: bool,
    pub beta_shape: f64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig {
            enabled: true,
            beta_shape: 1.0,
        }
    }
}

/// Draws α ~ Beta(a, a).
pub fn sample_alpha(rng: &mut impl Rng, beta_shape: f64) -> Result<f64> {
    let beta = Beta::new(beta_shape, beta_shape)
        .map_err(|e| Error::InvalidArg(format!("invalid Beta shape {beta_shape}: {e}")))?;
    Ok(beta.sample(rng))
}

/// x = α·x₁ + (1−α)·x₂ and y = α·y₁ + (1−α)·y₂ for a fixed α.
///
/// Mixed pairs are used *in addition to* the originals by the training
/// loop, never instead of them.
pub fn mixup_with_alpha(
    x1: &[f64],
    y1: f64,
    x2: &[f64],
    y2: f64,
    alpha: f64,
) -> Result<(Vec<f64>, f64)> {
    if x1.len() != x2.len() {
        return Err(Error::Shape(format!(
            "mixup inputs differ in length: {} vs {}",
            x1.len(),
            x2.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArg(format!(
            "mixing weight {alpha} outside [0, 1]"
        )));
    }
    for &y in &[y1, y2] {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::InvalidArg(format!("label {y} outside [0, 1]")));
        }
    }
    let x = x1
        .iter()
        .zip(x2)
        .map(|(&a, &b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    Ok((x, alpha * y1 + (1.0 - alpha) * y2))
}

/// Samples α from the configured Beta and mixes the pair.
pub fn mixup(
    x1: &[f64],
    y1: f64,
    x2: &[f64],
    y2: f64,
    rng: &mut impl Rng,
    cfg: &MixupConfig,
) -> Result<(Vec<f64>, f64)> {
    let alpha = sample_alpha(rng, cfg.beta_shape)?;
    mixup_with_alpha(x1, y1, x2, y2, alpha)
}
