//! Mel-frequency cepstral coefficients.

use crate::error::{Error, Result};
use crate::mat::Mat;

use super::mel::LogMelSpectrogram;

/// Orthonormal DCT-II over the Mel axis, keeping the first `n_coeffs`
/// coefficients (coefficient 0, the frame energy term, included).
///
/// Basis: C[k][n] = s(k) · cos(π·(2n+1)·k / (2N)) with s(0) = √(1/N) and
/// s(k>0) = √(2/N), applied per frame. `expected_bins` pins the Mel
/// resolution this transform was designed for; a spectrogram with any other
/// bin count is rejected rather than silently reinterpreted.
pub fn mfcc(mel: &LogMelSpectrogram, expected_bins: usize, n_coeffs: usize) -> Result<Mat> {
    let n = mel.n_mels();
    if n != expected_bins {
        return Err(Error::Shape(format!(
            "expected a {expected_bins}-bin Mel spectrogram, got {n} bins"
        )));
    }
    if n_coeffs == 0 || n_coeffs > n {
        return Err(Error::InvalidArg(format!(
            "n_coeffs must be in 1..={n}, got {n_coeffs}"
        )));
    }

    let mut basis = Mat::zeros(n_coeffs, n);
    for k in 0..n_coeffs {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for j in 0..n {
            let angle = std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2.0 * n as f64);
            basis.set(k, j, scale * angle.cos());
        }
    }
    basis.matmul(mel.values())
}
