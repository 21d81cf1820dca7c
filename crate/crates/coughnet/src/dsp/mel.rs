//! Mel-scale filterbanks and log-Mel spectrograms.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Additive floor applied before the log, so silent frames map to
/// ln(1e-10) ≈ −23.026 instead of −∞.
pub const LOG_FLOOR: f64 = 1e-10;

/// Hz → Mel, using the 2595·log10(1 + f/700) scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Mel → Hz, inverse of [`hz_to_mel`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular Mel filterbank as an `n_mels × n_fft_bins` weight matrix.
///
/// Filter centers are spaced uniformly on the Mel scale between `fmin_hz`
/// and `fmax_hz`; each triangle spans its two neighbouring centers and is
/// normalized to peak at exactly 1.0. When filters are narrower than one
/// FFT bin (which happens at low frequencies once `n_mels` is large), the
/// triangle can miss every bin center; such a filter degenerates to a
/// single unit weight at the bin nearest its center frequency, so every
/// row stays non-zero.
pub fn mel_filterbank(
    n_mels: usize,
    n_fft_bins: usize,
    sample_rate_hz: u32,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Result<Mat> {
    if n_mels == 0 {
        return Err(Error::InvalidArg("n_mels must be positive".into()));
    }
    if n_fft_bins < 2 {
        return Err(Error::InvalidArg("need at least two FFT bins".into()));
    }
    let nyquist = sample_rate_hz as f64 / 2.0;
    if !(0.0..nyquist).contains(&fmin_hz) || fmax_hz <= fmin_hz || fmax_hz > nyquist {
        return Err(Error::InvalidArg(format!(
            "invalid band [{fmin_hz}, {fmax_hz}] Hz for Nyquist {nyquist} Hz"
        )));
    }

    let fft_len = 2 * (n_fft_bins - 1);
    let bin_hz = |k: usize| k as f64 * sample_rate_hz as f64 / fft_len as f64;

    let (mel_lo, mel_hi) = (hz_to_mel(fmin_hz), hz_to_mel(fmax_hz));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut fb = Mat::zeros(n_mels, n_fft_bins);
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = fb.row_mut(m);
        for (k, w) in row.iter_mut().enumerate() {
            let f = bin_hz(k);
            *w = if f >= lo && f <= center && center > lo {
                (f - lo) / (center - lo)
            } else if f > center && f <= hi && hi > center {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
        }
        let peak = row.iter().cloned().fold(0.0f64, f64::max);
        if peak > 0.0 {
            for w in row.iter_mut() {
                *w /= peak;
            }
        } else {
            // Triangle narrower than the bin spacing: fall back to the
            // nearest bin so the filter still passes energy.
            let nearest = (0..n_fft_bins)
                .min_by(|&a, &b| {
                    (bin_hz(a) - center)
                        .abs()
                        .partial_cmp(&(bin_hz(b) - center).abs())
                        .unwrap()
                })
                .unwrap();
            row[nearest] = 1.0;
        }
    }
    Ok(fb)
}

/// Log-compressed Mel spectrogram: rows are Mel channels, columns frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    values: Mat,
}

impl LogMelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn into_values(self) -> Mat {
        self.values
    }
}

/// Applies a Mel filterbank to a power spectrogram and log-compresses:
/// `ln(filterbank · power + 1e-10)`.
pub fn log_mel(power: &Mat, filterbank: &Mat) -> Result<LogMelSpectrogram> {
    if filterbank.cols() != power.rows() {
        return Err(Error::Shape(format!(
            "filterbank expects {} FFT bins, spectrogram has {}",
            filterbank.cols(),
            power.rows()
        )));
    }
    let mut values = filterbank.matmul(power)?;
    for v in values.data_mut() {
        *v = (*v + LOG_FLOOR).ln();
    }
    if !values.is_finite() {
        return Err(Error::NonFinite("log-Mel spectrogram".into()));
    }
    Ok(LogMelSpectrogram { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::DEFAULT_SEGMENT_LEN;
    use crate::dsp::stft::{stft_power, StftConfig};

    #[test]
    fn mel_scale_anchors() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        // The scale is calibrated so 1 kHz sits near 1000 Mel.
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
        for &f in &[50.0, 440.0, 3000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn every_filter_peaks_at_exactly_one() {
        for &n_mels in &[26usize, 64, 128] {
            let fb = mel_filterbank(n_mels, 257, 16_000, 0.0, 8_000.0).unwrap();
            for m in 0..n_mels {
                let peak = fb.row(m).iter().cloned().fold(f64::MIN, f64::max);
                assert_eq!(peak, 1.0, "filter {m} of {n_mels} peaks at {peak}");
                assert!(fb.row(m).iter().any(|&w| w > 0.0));
            }
        }
    }

    #[test]
    fn filter_centers_are_monotonic() {
        let fb = mel_filterbank(26, 257, 16_000, 0.0, 8_000.0).unwrap();
        let argmax = |m: usize| {
            (0..257)
                .max_by(|&a, &b| fb.get(m, a).partial_cmp(&fb.get(m, b)).unwrap())
                .unwrap()
        };
        for m in 1..26 {
            assert!(argmax(m) >= argmax(m - 1));
        }
    }

    #[test]
    fn wide_filter_is_triangular() {
        // The topmost filter at 26 Mel bins spans hundreds of Hz, i.e. many
        // bins: weights must rise to the peak and fall after it.
        let fb = mel_filterbank(26, 257, 16_000, 0.0, 8_000.0).unwrap();
        let row = fb.row(25);
        let peak = (0..257)
            .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
            .unwrap();
        let support: Vec<usize> = (0..257).filter(|&k| row[k] > 0.0).collect();
        assert!(
            support.len() > 10,
            "top filter covers {} bins",
            support.len()
        );
        for w in support.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= peak {
                assert!(row[b] >= row[a]);
            } else if a >= peak {
                assert!(row[b] <= row[a]);
            }
        }
    }

    #[test]
    fn narrow_filters_fall_back_to_nearest_bin() {
        // At 128 Mel bins over 0–8 kHz the low-frequency triangles are
        // narrower than the 31.25 Hz bin spacing, so the fallback must fire
        // for at least one filter — and those rows carry a single 1.0.
        let fb = mel_filterbank(128, 257, 16_000, 0.0, 8_000.0).unwrap();
        let degenerate = (0..128).filter(|&m| {
            let nz: Vec<f64> = fb.row(m).iter().cloned().filter(|&w| w > 0.0).collect();
            nz.len() == 1 && nz[0] == 1.0
        });
        assert!(degenerate.count() > 0);
    }

    #[test]
    fn silence_maps_to_log_floor() {
        let cfg = StftConfig::default();
        let power = stft_power(&vec![0.0; DEFAULT_SEGMENT_LEN], &cfg).unwrap();
        let fb = mel_filterbank(26, cfg.n_bins(), 16_000, 0.0, 8_000.0).unwrap();
        let lm = log_mel(&power, &fb).unwrap();
        assert_eq!((lm.n_mels(), lm.n_frames()), (26, 224));
        let floor = LOG_FLOOR.ln();
        for &v in lm.values().data() {
            assert_eq!(v, floor);
        }
    }

    #[test]
    fn band_energy_lands_in_matching_filters() {
        // A 2 kHz tone should put its energy into filters centered near
        // 2 kHz, not into the lowest or highest channels.
        let samples: Vec<f64> = (0..DEFAULT_SEGMENT_LEN)
            .map(|i| (2.0 * std::f64::consts::PI * 2000.0 * i as f64 / 16_000.0).sin())
            .collect();
        let cfg = StftConfig::default();
        let power = stft_power(&samples, &cfg).unwrap();
        let fb = mel_filterbank(26, cfg.n_bins(), 16_000, 0.0, 8_000.0).unwrap();
        let lm = log_mel(&power, &fb).unwrap();
        let mean_row = |m: usize| {
            (0..lm.n_frames())
                .map(|t| lm.values().get(m, t))
                .sum::<f64>()
                / lm.n_frames() as f64
        };
        let hottest = (0..26)
            .max_by(|&a, &b| mean_row(a).partial_cmp(&mean_row(b)).unwrap())
            .unwrap();
        let center = mel_to_hz(hz_to_mel(0.0) + (hz_to_mel(8000.0)) * (hottest + 1) as f64 / 27.0);
        assert!(
            (center - 2000.0).abs() < 400.0,
            "hottest filter {hottest} centered at {center:.0} Hz"
        );
    }

    #[test]
    fn centers_follow_mel_formula() {
        // Recompute the expected center frequencies straight from the Mel
        // formula and check each filter peaks within one bin of its center.
        let (n_mels, n_bins) = (64usize, 257usize);
        let fb = mel_filterbank(n_mels, n_bins, 16_000, 0.0, 8_000.0).unwrap();
        let mel_hi = 2595.0 * (1.0f64 + 8000.0 / 700.0).log10();
        let expected_center = |m: usize| {
            let mel = mel_hi * (m + 1) as f64 / (n_mels + 1) as f64;
            700.0 * (10f64.powf(mel / 2595.0) - 1.0)
        };
        // Equal Mel spacing of consecutive centers.
        let spacing = hz_to_mel(expected_center(1)) - hz_to_mel(expected_center(0));
        for m in 1..n_mels {
            let d = hz_to_mel(expected_center(m)) - hz_to_mel(expected_center(m - 1));
            assert!((d - spacing).abs() < 1e-9 * spacing);
        }
        assert!(expected_center(0) > 0.0);
        assert!(expected_center(n_mels - 1) < 8000.0);
        let bin_width = 16_000.0 / 512.0;
        for m in 0..n_mels {
            let argmax = (0..n_bins)
                .max_by(|&a, &b| fb.get(m, a).partial_cmp(&fb.get(m, b)).unwrap())
                .unwrap();
            let peak_hz = argmax as f64 * bin_width;
            assert!(
                (peak_hz - expected_center(m)).abs() <= bin_width + 1e-9,
                "filter {m}: peak at {peak_hz:.1} Hz, center {:.1} Hz",
                expected_center(m)
            );
        }
    }

    #[test]
    fn doubling_amplitude_shifts_log_energy_by_ln4() {
        // 2× amplitude means 4× power, i.e. +ln 4 wherever the energy sits
        // well above the floor.
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut noise = || {
            // xorshift* keeps this test free of RNG crate coupling
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545F4914F6CDD1D) >> 40) as f64 / (1u64 << 24) as f64 - 0.5
        };
        let samples: Vec<f64> = (0..8192).map(|_| noise()).collect();
        let doubled: Vec<f64> = samples.iter().map(|&s| 2.0 * s).collect();
        let cfg = StftConfig::default();
        let fb = mel_filterbank(26, cfg.n_bins(), 16_000, 0.0, 8_000.0).unwrap();
        let a = log_mel(&stft_power(&samples, &cfg).unwrap(), &fb).unwrap();
        let b = log_mel(&stft_power(&doubled, &cfg).unwrap(), &fb).unwrap();
        let ln4 = 4.0f64.ln();
        let mut checked = 0;
        for (va, vb) in a.values().data().iter().zip(b.values().data()) {
            if *va > -10.0 {
                assert!((vb - va - ln4).abs() < 1e-3, "shift {}", vb - va);
                checked += 1;
            }
        }
        assert!(checked > 100, "only {checked} cells above the floor");
    }

    #[test]
    fn shape_mismatch_is_error() {
        let fb = mel_filterbank(26, 257, 16_000, 0.0, 8_000.0).unwrap();
        let power = Mat::zeros(129, 10);
        assert!(log_mel(&power, &fb).is_err());
    }

    #[test]
    fn invalid_band_rejected() {
        assert!(mel_filterbank(26, 257, 16_000, 0.0, 9_000.0).is_err());
        assert!(mel_filterbank(26, 257, 16_000, 4_000.0, 1_000.0).is_err());
        assert!(mel_filterbank(0, 257, 16_000, 0.0, 8_000.0).is_err());
    }
}
