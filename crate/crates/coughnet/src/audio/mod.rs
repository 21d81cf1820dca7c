//! Audio ingestion: WAV decoding, resampling, segmentation, manifests.

mod manifest;
mod resample;
mod wav;

pub use manifest::{load_manifest, Label, ManifestEntry, N_FOLDS};
pub use resample::resample;
pub use wav::{decode_wav, write_wav_16bit};

use crate::error::{Error, Result};

/// Segment length in samples at the pipeline rate (3.6 s at 16 kHz).
pub const DEFAULT_SEGMENT_LEN: usize = 57_600;

/// Pipeline sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// A decoded mono waveform.
#[derive(Debug, Clone)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    source_id: String,
}

impl AudioClip {
    /// Validates the clip invariants: non-empty, finite, positive rate.
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: u32,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Audio("empty clip".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(Error::NonFinite("audio samples".into()));
        }
        Ok(AudioClip {
            samples,
            sample_rate_hz,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A fixed-length training unit cut from a clip.
#[derive(Debug, Clone)]
pub struct Segment {
    samples: Vec<f64>,
    parent_id: String,
    index: usize,
}

impl Segment {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn parent_id(&self) -> &str {
        &self.parent_id
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cuts a clip into non-overlapping windows of `segment_len` samples.
///
/// A clip shorter than one window, or a trailing remainder, is tile-padded:
/// the short chunk is repeated cyclically and truncated to exactly
/// `segment_len` samples. Every input sample therefore appears in at least
/// one segment, and concatenating the segments with the padding stripped
/// reconstructs the input exactly.
pub fn segment(clip: &AudioClip, segment_len: usize) -> Result<Vec<Segment>> {
    if segment_len == 0 {
        return Err(Error::InvalidArg("segment_len must be positive".into()));
    }
    if clip.is_empty() {
        return Err(Error::Audio("cannot segment an empty clip".into()));
    }
    let mut out = Vec::new();
    for (index, chunk) in clip.samples().chunks(segment_len).enumerate() {
        let samples = if chunk.len() == segment_len {
            chunk.to_vec()
        } else {
            tile_to_len(chunk, segment_len)
        };
        out.push(Segment {
            samples,
            parent_id: clip.source_id().to_string(),
            index,
        });
    }
    Ok(out)
}

fn tile_to_len(chunk: &[f64], len: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(len);
    while v.len() < len {
        let take = (len - v.len()).min(chunk.len());
        v.extend_from_slice(&chunk[..take]);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, DEFAULT_SAMPLE_RATE, "test").unwrap()
    }

    #[test]
    fn two_exact_segments() {
        let c = clip(vec![0.0; 115_200]);
        let segs = segment(&c, DEFAULT_SEGMENT_LEN).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.len() == DEFAULT_SEGMENT_LEN));
    }

    #[test]
    fn exact_fit_is_identity() {
        let samples: Vec<f64> = (0..DEFAULT_SEGMENT_LEN).map(|i| (i as f64).sin()).collect();
        let c = clip(samples.clone());
        let segs = segment(&c, DEFAULT_SEGMENT_LEN).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].samples(), &samples[..]);
        assert_eq!(segs[0].index(), 0);
    }

    // Reference tiler: build the expected second segment by index arithmetic.
    #[test]
    fn trailing_remainder_is_tiled_cyclically() {
        let n = 60_000;
        let samples: Vec<f64> = (0..n).map(|i| (i % 997) as f64 / 997.0).collect();
        let c = clip(samples.clone());
        let segs = segment(&c, DEFAULT_SEGMENT_LEN).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].samples(), &samples[..DEFAULT_SEGMENT_LEN]);

        let remainder = &samples[DEFAULT_SEGMENT_LEN..];
        let expected: Vec<f64> = (0..DEFAULT_SEGMENT_LEN)
            .map(|i| remainder[i % remainder.len()])
            .collect();
        assert_eq!(segs[1].samples(), &expected[..]);
        // Spelled out: the remainder itself, then its first 55,200 samples again.
        assert_eq!(&segs[1].samples()[..remainder.len()], remainder);
        assert_eq!(
            &segs[1].samples()[remainder.len()..],
            &expected[remainder.len()..]
        );
        assert_eq!(segs[1].index(), 1);
    }

    #[test]
    fn short_clip_is_tiled() {
        let samples = vec![1.0, 2.0, 3.0];
        let c = clip(samples);
        let segs = segment(&c, 8).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].samples(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0]);
    }

    #[test]
    fn empty_clip_rejected() {
        let c = AudioClip {
            samples: vec![],
            sample_rate_hz: 16_000,
            source_id: "x".into(),
        };
        assert!(segment(&c, 8).is_err());
        assert!(AudioClip::new(vec![], 16_000, "x").is_err());
    }

    #[test]
    fn segment_coverage_reconstructs_input() {
        // Property from the module contract: strip the tile padding and the
        // concatenation equals the original.
        for n in [100usize, 57_600, 60_000, 115_199] {
            let samples: Vec<f64> = (0..n).map(|i| ((i * 31) % 101) as f64).collect();
            let c = clip(samples.clone());
            let segs = segment(&c, DEFAULT_SEGMENT_LEN).unwrap();
            let mut rebuilt = Vec::new();
            for (i, s) in segs.iter().enumerate() {
                let remaining = n - i * DEFAULT_SEGMENT_LEN;
                let real = remaining.min(DEFAULT_SEGMENT_LEN);
                rebuilt.extend_from_slice(&s.samples()[..real]);
            }
            assert_eq!(rebuilt, samples);
        }
    }
}
