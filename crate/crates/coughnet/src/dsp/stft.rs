//! Short-time power spectrogram.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Analysis window geometry. With the 512/256 default a 57,600-sample
/// segment yields exactly (57,600 − 512) / 256 + 1 = 224 frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 512,
            hop: 256,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || !self.window_len.is_power_of_two() {
            return Err(Error::InvalidArg(format!(
                "window_len must be a positive power of two, got {}",
                self.window_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::InvalidArg(format!(
                "hop must be in 1..={}, got {}",
                self.window_len, self.hop
            )));
        }
        Ok(())
    }

    /// Number of complete windows that fit, with no padding at either end.
    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len {
            0
        } else {
            (n_samples - self.window_len) / self.hop + 1
        }
    }

    /// Number of non-negative frequency bins per frame.
    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }
}

/// Periodic Hann window: w[n] = 0.5 · (1 − cos(2πn/N)).
///
/// The denominator is N rather than N−1, so the implied sequence is exactly
/// periodic — the right variant for overlapping analysis windows.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Power spectrogram: |FFT(hann · frame)|² per window, frames laid out as
/// columns. The result has `window_len/2 + 1` rows and `n_frames` columns;
/// no centering or padding is applied, so only complete windows are used.
pub fn stft_power(samples: &[f64], cfg: &StftConfig) -> Result<Mat> {
    cfg.validate()?;
    let n_frames = cfg.n_frames(samples.len());
    if n_frames == 0 {
        return Err(Error::Shape(format!(
            "need at least {} samples for one window, got {}",
            cfg.window_len,
            samples.len()
        )));
    }

    let window = hann_window(cfg.window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.window_len);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.window_len];

    let mut out = Mat::zeros(cfg.n_bins(), n_frames);
    for frame in 0..n_frames {
        let start = frame * cfg.hop;
        for (i, (&s, &w)) in samples[start..start + cfg.window_len]
            .iter()
            .zip(&window)
            .enumerate()
        {
            buf[i] = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        for bin in 0..cfg.n_bins() {
            out.set(bin, frame, buf[bin].norm_sqr());
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("power spectrogram".into()));
    }
    Ok(out)
}
