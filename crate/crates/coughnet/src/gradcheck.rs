//! Central finite-difference gradient checking.
//!
//! Every hand-written backward pass in this crate is validated against the
//! numeric derivative (f(x+h) − f(x−h)) / 2h in double precision. The
//! default step and tolerance here are what the test suite pins.

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Default acceptance threshold for [`relative_error`].
pub const GRAD_TOL: f64 = 1e-4;

/// Numeric gradient of a scalar function via central differences, one
/// coordinate at a time.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let original = probe[i];
        probe[i] = original + step;
        let hi = f(&probe);
        probe[i] = original - step;
        let lo = f(&probe);
        probe[i] = original;
        grad.push((hi - lo) / (2.0 * step));
    }
    grad
}

/// |a − n| / max(|a|, |n|, 1e-3).
///
/// The 1e-3 floor keeps near-zero gradients from blowing up the ratio on
/// pure floating-point noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Worst-case [`relative_error`] over paired gradient components.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}
