//! Class-weighted binary cross-entropy on logits.

use crate::error::{Error, Result};

/// Mean loss over the batch plus ∂loss/∂logit per element.
#[derive(Debug, Clone)]
pub struct BceLoss {
    pub loss: f64,
    pub dlogits: Vec<f64>,
}

/// softplus(t) = ln(1 + eᵗ), computed as max(t, 0) + ln(1 + e^(−|t|)) so it
/// never overflows.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted binary cross-entropy with logits:
///
/// loss_i = pos_weight · y_i · softplus(−z_i) + (1 − y_i) · softplus(z_i),
///
/// averaged over the batch. This is the stable rearrangement of
/// −[pos_weight · y · ln σ(z) + (1 − y) · ln(1 − σ(z))]: it is finite and
/// differentiable for any logit, including |z| in the hundreds. Soft labels
/// in [0, 1] (mixed pairs) are allowed; `pos_weight` scales the positive
/// term to counter class imbalance.
pub fn bce_with_logits(logits: &[f64], targets: &[f64], pos_weight: f64) -> Result<BceLoss> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(Error::Shape(format!(
            "need matching non-empty logits/targets, got {} and {}",
            logits.len(),
            targets.len()
        )));
    }
    if !(pos_weight > 0.0) || !pos_weight.is_finite() {
        return Err(Error::InvalidArg(format!(
            "pos_weight must be a positive finite number, got {pos_weight}"
        )));
    }
    for &y in targets {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::InvalidArg(format!("target {y} outside [0, 1]")));
        }
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let mut dlogits = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        total += pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
        let s = sigmoid(z);
        // d softplus(−z)/dz = s − 1; d softplus(z)/dz = s.
        dlogits.push((pos_weight * y * (s - 1.0) + (1.0 - y) * s) / n);
    }
    let loss = total / n;
    if !loss.is_finite() || dlogits.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("bce_with_logits".into()));
    }
    Ok(BceLoss { loss, dlogits })
}
