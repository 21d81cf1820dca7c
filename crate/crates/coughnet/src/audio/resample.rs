//! Band-limited sample-rate conversion.

use std::f64::consts::PI;

use super::AudioClip;
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel on each side, measured at the cutoff.
const ZERO_CROSSINGS: f64 = 16.0;

/// Kaiser window shape parameter (roughly 100 dB stopband).
const KAISER_BETA: f64 = 10.0;

/// Resamples a clip to `target_hz` with a Kaiser-windowed sinc kernel.
///
/// The kernel cutoff sits at 0.45 of the lower of the two rates, which
/// low-passes below the new Nyquist when downsampling and below the source
/// band when upsampling. Each output sample renormalizes by the local kernel
/// sum, so constant signals pass through unchanged out to the clip edges.
/// Output length is `round(input_len * target_hz / source_hz)`.
///
/// Resampling to the clip's own rate is the identity, which makes the
/// operation idempotent at the target rate.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip> {
    if target_hz == 0 {
        return Err(Error::InvalidArg("target rate must be positive".into()));
    }
    let source_hz = clip.sample_rate_hz();
    if source_hz == target_hz {
        return Ok(clip.clone());
    }

    let x = clip.samples();
    let ratio = f64::from(target_hz) / f64::from(source_hz);
    let out_len = ((x.len() as f64) * ratio).round().max(1.0) as usize;

    // Normalized cutoff in cycles per input sample.
    let cutoff_hz = 0.45 * f64::from(source_hz.min(target_hz));
    let nu = cutoff_hz / f64::from(source_hz);
    let half_width = ZERO_CROSSINGS / (2.0 * nu);
    let i0_beta = bessel_i0(KAISER_BETA);

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let t = n as f64 / ratio;
        let lo = ((t - half_width).ceil() as i64).max(0) as usize;
        let hi = ((t + half_width).floor() as i64).min(x.len() as i64 - 1) as usize;
        let mut acc = 0.0;
        let mut weight_sum = 0.0;
        for j in lo..=hi {
            let u = t - j as f64;
            let w = sinc(2.0 * nu * u) * kaiser(u / half_width, i0_beta);
            acc += w * x[j];
            weight_sum += w;
        }
        out.push(if weight_sum != 0.0 {
            acc / weight_sum
        } else {
            0.0
        });
    }

    AudioClip::new(out, target_hz, clip.source_id())
}

#[inline]
fn sinc(v: f64) -> f64 {
    if v == 0.0 {
        1.0
    } else {
        (PI * v).sin() / (PI * v)
    }
}

#[inline]
fn kaiser(x: f64, i0_beta: f64) -> f64 {
    let t = 1.0 - x * x;
    if t <= 0.0 {
        0.0
    } else {
        bessel_i0(KAISER_BETA * t.sqrt()) / i0_beta
    }
}

/// Modified Bessel function of the first kind, order zero (series expansion).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::DEFAULT_SAMPLE_RATE;
    use rustfft::{num_complex::Complex, FftPlanner};

    #[test]
    fn length_follows_rate_ratio() {
        let clip = AudioClip::new(vec![0.1; 44_100], 44_100, "t").unwrap();
        let out = resample(&clip, DEFAULT_SAMPLE_RATE).unwrap();
        assert_eq!(out.len(), 16_000);
        assert_eq!(out.sample_rate_hz(), 16_000);
    }

    #[test]
    fn constant_signal_preserved() {
        for (src, dst) in [(44_100u32, 16_000u32), (16_000, 44_100), (22_050, 16_000)] {
            let clip = AudioClip::new(vec![0.25; src as usize / 10], src, "t").unwrap();
            let out = resample(&clip, dst).unwrap();
            for &v in out.samples() {
                assert!((v - 0.25).abs() < 1e-6, "{src}->{dst}: {v}");
            }
        }
    }

    // FFT-peak oracle: the dominant bin of the resampled sine must sit at
    // the original frequency to within one bin width.
    #[test]
    fn sine_peak_survives_resampling() {
        let src = 44_100u32;
        let freq = 440.0;
        let samples: Vec<f64> = (0..src as usize)
            .map(|i| (2.0 * PI * freq * i as f64 / src as f64).sin())
            .collect();
        let clip = AudioClip::new(samples, src, "t").unwrap();
        let out = resample(&clip, DEFAULT_SAMPLE_RATE).unwrap();

        let n = 8192;
        let mut buf: Vec<Complex<f64>> = out.samples()[..n]
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let peak_bin = (1..n / 2)
            .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
            .unwrap();
        let bin_width = DEFAULT_SAMPLE_RATE as f64 / n as f64;
        let peak_hz = peak_bin as f64 * bin_width;
        assert!(
            (peak_hz - freq).abs() <= bin_width,
            "peak at {peak_hz} Hz, bin width {bin_width}"
        );
    }

    #[test]
    fn idempotent_at_target_rate() {
        let samples: Vec<f64> = (0..4410).map(|i| (i as f64 * 0.013).sin()).collect();
        let clip = AudioClip::new(samples, 44_100, "t").unwrap();
        let once = resample(&clip, 16_000).unwrap();
        let twice = resample(&once, 16_000).unwrap();
        assert_eq!(once.samples(), twice.samples());
    }

    #[test]
    fn zero_target_rejected() {
        let clip = AudioClip::new(vec![0.0; 10], 16_000, "t").unwrap();
        assert!(resample(&clip, 0).is_err());
    }
}
