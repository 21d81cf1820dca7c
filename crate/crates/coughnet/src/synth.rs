//! Deterministic two-class synthetic cough corpus for desk-scale runs.
//!
//! Each clip is band-limited noise bursts over a quiet noise floor. The
//! negative class centers its bursts in a low band (300–900 Hz); the
//! positive class sits higher (800–2400 Hz) and adds an 8–16 Hz amplitude
//! tremor on every burst. The bands overlap and burst level jitters
//! against the floor, so the task is learnable without being trivial.
//! Generation is a pure function of [`SynthSpec`], including its seed:
//! the same spec writes byte-identical WAV files and manifest.

use std::f64::consts::TAU;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::audio::{write_wav_16bit, Label, ManifestEntry, N_FOLDS};
use crate::error::{Error, Result};

/// Sample rate the corpus is rendered at.
pub const SYNTH_SAMPLE_RATE: u32 = 16_000;

/// Partials summed per burst.
const BURST_PARTIALS: usize = 8;

/// What to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_files: usize,
    /// `negatives : positives` ratio, e.g. `(9, 1)` for a 10% positive rate.
    pub imbalance: (u32, u32),
    /// Uniform clip-duration range in seconds.
    pub duration_secs: (f64, f64),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_files: 200,
            imbalance: (9, 1),
            duration_secs: (2.0, 4.0),
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_files < 2 {
            return Err(Error::InvalidArg(
                "need at least two files, one per class".into(),
            ));
        }
        let (neg, pos) = self.imbalance;
        if neg == 0 || pos == 0 {
            return Err(Error::InvalidArg(
                "both sides of the imbalance ratio must be positive".into(),
            ));
        }
        let (lo, hi) = self.duration_secs;
        if !(lo >= 0.1 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArg(format!(
                "duration range [{lo}, {hi}] must satisfy 0.1 <= lo <= hi"
            )));
        }
        Ok(())
    }

    /// Positive-file count implied by the ratio, clamped so both classes
    /// are non-empty.
    pub fn n_positives(&self) -> usize {
        let (neg, pos) = self.imbalance;
        let ideal = self.n_files * pos as usize / (neg as usize + pos as usize);
        ideal.clamp(1, self.n_files - 1)
    }
}

/// Writes the WAV files plus `manifest.csv` into `out_dir` and returns
/// the manifest rows (paths relative to `out_dir`).
///
/// Folds are assigned round-robin within each class, so every fold holds
/// the corpus class ratio to within one file.
pub fn generate_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let n_pos = spec.n_positives();
    let n_neg = spec.n_files - n_pos;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::with_capacity(spec.n_files);

    for (label, count) in [(Label::Negative, n_neg), (Label::Positive, n_pos)] {
        let prefix = match label {
            Label::Negative => "neg",
            Label::Positive => "pos",
        };
        for i in 0..count {
            let name = format!("{prefix}_{i:03}.wav");
            let duration = rng.random_range(spec.duration_secs.0..=spec.duration_secs.1);
            let samples = render_clip(&mut rng, label, duration);
            write_wav_16bit(out_dir.join(&name), &samples, SYNTH_SAMPLE_RATE)?;
            entries.push(ManifestEntry {
                path: name.into(),
                label,
                fold: i % N_FOLDS,
            });
        }
    }

    let manifest_path = out_dir.join("manifest.csv");
    let mut text = String::from("path,label,fold\n");
    for e in &entries {
        text.push_str(&format!(
            "{},{},{}\n",
            e.path.display(),
            e.label.as_u8(),
            e.fold
        ));
    }
    std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(entries)
}

/// One clip: a quiet noise floor with 2–5 class-colored bursts mixed in.
fn render_clip(rng: &mut ChaCha8Rng, label: Label, duration_secs: f64) -> Vec<f64> {
    let n = (duration_secs * f64::from(SYNTH_SAMPLE_RATE)) as usize;
    let floor = rng.random_range(0.02..0.08);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-floor..floor)).collect();

    let n_bursts = rng.random_range(2..=5);
    for _ in 0..n_bursts {
        let len_secs = rng.random_range(0.2..0.6_f64).min(duration_secs * 0.45);
        let len = ((len_secs * f64::from(SYNTH_SAMPLE_RATE)) as usize).max(64);
        let start = rng.random_range(0..=n - len);
        let burst = render_burst(rng, label, len);
        for (t, b) in burst.iter().enumerate() {
            x[start + t] += b;
        }
    }

    let peak = x.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if peak > 0.95 {
        let scale = 0.95 / peak;
        for s in &mut x {
            *s *= scale;
        }
    }
    x
}

/// One burst: a handful of random partials around a class-band center
/// under a raised-cosine envelope, with the positive class amplitude-
/// modulated by a slow tremor.
fn render_burst(rng: &mut ChaCha8Rng, label: Label, len: usize) -> Vec<f64> {
    let (band_lo, band_hi) = match label {
        Label::Negative => (300.0, 900.0),
        Label::Positive => (800.0, 2400.0),
    };
    let center = rng.random_range(band_lo..band_hi);
    let spread = center * 0.25;
    let peak = rng.random_range(0.3..0.7);
    let tremor = match label {
        Label::Negative => None,
        Label::Positive => Some((rng.random_range(8.0..16.0), rng.random_range(0.0..TAU))),
    };

    let partials: Vec<(f64, f64)> = (0..BURST_PARTIALS)
        .map(|_| {
            (
                rng.random_range(center - spread..center + spread),
                rng.random_range(0.0..TAU),
            )
        })
        .collect();

    let dt = 1.0 / f64::from(SYNTH_SAMPLE_RATE);
    let mut burst: Vec<f64> = (0..len)
        .map(|t| {
            let secs = t as f64 * dt;
            let env = (std::f64::consts::PI * t as f64 / (len - 1) as f64)
                .sin()
                .powi(2);
            let tone: f64 = partials
                .iter()
                .map(|&(f, phase)| (TAU * f * secs + phase).sin())
                .sum();
            let am = match tremor {
                Some((f_am, phase)) => (1.0 + 0.9 * (TAU * f_am * secs + phase).sin()) / 1.9,
                None => 1.0,
            };
            env * am * tone
        })
        .collect();

    let max = burst.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if max > 0.0 {
        let scale = peak / max;
        for s in &mut burst {
            *s *= scale;
        }
    }
    burst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{decode_wav, load_manifest};
    use crate::dsp::{stft_power, StftConfig};

    fn quick_spec(n_files: usize, imbalance: (u32, u32), seed: u64) -> SynthSpec {
        SynthSpec {
            n_files,
            imbalance,
            duration_secs: (0.5, 0.8),
            seed,
        }
    }

    #[test]
    fn counts_and_folds_are_stratified() {
        let dir = tempfile::tempdir().unwrap();
        let spec = quick_spec(100, (9, 1), 1);
        let entries = generate_corpus(&spec, dir.path()).unwrap();

        assert_eq!(entries.len(), 100);
        let positives: Vec<_> = entries.iter().filter(|e| e.label.is_positive()).collect();
        assert_eq!(positives.len(), 10);

        for fold in 0..N_FOLDS {
            let in_fold: Vec<_> = entries.iter().filter(|e| e.fold == fold).collect();
            let pos = in_fold.iter().filter(|e| e.label.is_positive()).count();
            assert_eq!(pos, 2, "positives per fold");
            assert_eq!(in_fold.len(), 20, "files per fold");
        }
    }

    #[test]
    fn tiny_ratios_keep_both_classes() {
        assert_eq!(quick_spec(6, (100, 1), 0).n_positives(), 1);
        assert_eq!(quick_spec(6, (1, 100), 0).n_positives(), 5);
        assert!(quick_spec(1, (1, 1), 0).validate().is_err());
        assert!(quick_spec(10, (0, 1), 0).validate().is_err());
    }

    #[test]
    fn same_seed_writes_identical_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let spec = quick_spec(8, (3, 1), 7);
        let a = generate_corpus(&spec, dir_a.path()).unwrap();
        let b = generate_corpus(&spec, dir_b.path()).unwrap();
        assert_eq!(a, b);

        for entry in &a {
            let bytes_a = std::fs::read(dir_a.path().join(&entry.path)).unwrap();
            let bytes_b = std::fs::read(dir_b.path().join(&entry.path)).unwrap();
            assert_eq!(bytes_a, bytes_b, "{}", entry.path.display());
        }
        assert_eq!(
            std::fs::read(dir_a.path().join("manifest.csv")).unwrap(),
            std::fs::read(dir_b.path().join("manifest.csv")).unwrap()
        );

        let different = generate_corpus(&quick_spec(8, (3, 1), 8), dir_b.path()).unwrap();
        let first = &different[0];
        assert_ne!(
            std::fs::read(dir_a.path().join(&first.path)).unwrap(),
            std::fs::read(dir_b.path().join(&first.path)).unwrap()
        );
    }

    #[test]
    fn manifest_roundtrips_through_the_loader() {
        let dir = tempfile::tempdir().unwrap();
        let entries = generate_corpus(&quick_spec(10, (4, 1), 3), dir.path()).unwrap();
        let loaded = load_manifest(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(entries, loaded);
        for e in &loaded {
            assert!(dir.path().join(&e.path).exists());
        }
    }

    /// The class contrast the models are supposed to find: positives put
    /// a larger share of their energy above 1 kHz than negatives do.
    #[test]
    fn classes_separate_in_band_energy() {
        let dir = tempfile::tempdir().unwrap();
        let entries = generate_corpus(&quick_spec(10, (1, 1), 5), dir.path()).unwrap();
        let stft = StftConfig {
            window_len: 512,
            hop: 256,
        };
        let hz_per_bin = f64::from(SYNTH_SAMPLE_RATE) / 512.0;
        let split_bin = (1000.0 / hz_per_bin) as usize;

        let high_fraction = |name: &std::path::Path| -> f64 {
            let clip = decode_wav(dir.path().join(name)).unwrap();
            let power = stft_power(clip.samples(), &stft).unwrap();
            let mut low = 0.0;
            let mut high = 0.0;
            for (bin, row) in power.iter_rows().enumerate() {
                let energy: f64 = row.iter().sum();
                if bin >= split_bin {
                    high += energy;
                } else {
                    low += energy;
                }
            }
            high / (low + high)
        };

        let (mut pos_min, mut neg_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for e in &entries {
            let f = high_fraction(&e.path);
            if e.label.is_positive() {
                pos_min = pos_min.min(f);
            } else {
                neg_max = neg_max.max(f);
            }
        }
        assert!(
            pos_min > neg_max,
            "positives ({pos_min:.3}) should be high-band heavier than negatives ({neg_max:.3})"
        );
    }
}
