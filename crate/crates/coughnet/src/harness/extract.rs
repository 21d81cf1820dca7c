//! Shared feature extraction for training and scoring.
//!
//! Every model kind consumes the same decoded, resampled, segmented audio;
//! they differ only in which representation of a segment they read. The
//! extractor computes all of them in one pass per segment — the STFT
//! dominates the cost and is shared — so a corpus is decoded exactly once
//! no matter how many models or folds use it.

use std::path::{Path, PathBuf};

use crate::audio::{decode_wav, resample, segment, AudioClip, Label, ManifestEntry, Segment};
use crate::config::Config;
use crate::dsp::{
    apply_functionals, log_mel, mel_filterbank, mfcc, stft_power, FunctionalCatalog, StftConfig,
};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::models::{FeatureSet, ModelSpec};

/// Every representation of one fixed-length segment.
#[derive(Debug, Clone)]
pub struct SegmentFeatures {
    /// Statistical functionals over the 26-bin log-Mel rows.
    pub functionals_logmel: Vec<f64>,
    /// Statistical functionals over the MFCC rows.
    pub functionals_mfcc: Vec<f64>,
    /// Flat `[mel_bins_image_slot × n_frames]` log-Mel spectrogram.
    pub logmel_image: Vec<f64>,
    /// Flat `[mel_bins_audio_slot × n_frames]` log-Mel spectrogram.
    pub logmel_audio: Vec<f64>,
    pub n_frames: usize,
}

impl SegmentFeatures {
    /// The flat model input a given architecture reads.
    pub fn input_for(&self, spec: &ModelSpec) -> Result<&[f64]> {
        match spec {
            ModelSpec::HandcraftedDnn {
                feature_set,
                input_dim,
            } => {
                let values = match feature_set {
                    FeatureSet::LogMel => &self.functionals_logmel,
                    FeatureSet::Mfcc => &self.functionals_mfcc,
                };
                if values.len() != *input_dim {
                    return Err(Error::Shape(format!(
                        "model expects {input_dim} features, extractor produced {}",
                        values.len()
                    )));
                }
                Ok(values)
            }
            ModelSpec::SpecCnnA { n_mels, .. } => {
                expect_mels(&self.logmel_image, *n_mels, self.n_frames)
            }
            ModelSpec::SpecCnnB { n_mels, .. } => {
                expect_mels(&self.logmel_audio, *n_mels, self.n_frames)
            }
        }
    }
}

fn expect_mels(values: &[f64], n_mels: usize, n_frames: usize) -> Result<&[f64]> {
    if values.len() != n_mels * n_frames {
        return Err(Error::Shape(format!(
            "model expects a {n_mels}-bin spectrogram, extractor produced {} values over \
             {n_frames} frames",
            values.len()
        )));
    }
    Ok(values)
}

/// One manifest row with its extracted per-segment features.
#[derive(Debug, Clone)]
pub struct FileFeatures {
    pub path: PathBuf,
    pub label: Label,
    pub fold: usize,
    pub segments: Vec<SegmentFeatures>,
}

/// A fully extracted dataset, ready for any model or fold split.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub files: Vec<FileFeatures>,
}

impl PreparedCorpus {
    pub fn n_files(&self) -> usize {
        self.files.len()
    }

    /// Files whose fold equals `fold` (the validation side of that fold).
    pub fn fold_files(&self, fold: usize) -> Vec<&FileFeatures> {
        self.files.iter().filter(|f| f.fold == fold).collect()
    }

    /// Files from every fold except `fold` (the training side).
    pub fn complement_files(&self, fold: usize) -> Vec<&FileFeatures> {
        self.files.iter().filter(|f| f.fold != fold).collect()
    }
}

/// Precomputed filterbanks and catalog shared across all segments.
pub struct FeatureExtractor {
    stft: StftConfig,
    sample_rate_hz: u32,
    segment_len: usize,
    fb_handcrafted: Mat,
    fb_image: Mat,
    fb_audio: Mat,
    mel_bins_handcrafted: usize,
    mfcc_coeffs: usize,
    catalog: FunctionalCatalog,
}

impl FeatureExtractor {
    pub fn new(cfg: &Config) -> Result<FeatureExtractor> {
        cfg.validate()?;
        let stft = StftConfig {
            window_len: cfg.stft_window,
            hop: cfg.stft_hop,
        };
        let n_bins = stft.n_bins();
        let fmax = f64::from(cfg.sample_rate) / 2.0;
        Ok(FeatureExtractor {
            stft,
            sample_rate_hz: cfg.sample_rate,
            segment_len: cfg.segment_len,
            fb_handcrafted: mel_filterbank(
                cfg.mel_bins_handcrafted,
                n_bins,
                cfg.sample_rate,
                0.0,
                fmax,
            )?,
            fb_image: mel_filterbank(cfg.mel_bins_image_slot, n_bins, cfg.sample_rate, 0.0, fmax)?,
            fb_audio: mel_filterbank(cfg.mel_bins_audio_slot, n_bins, cfg.sample_rate, 0.0, fmax)?,
            mel_bins_handcrafted: cfg.mel_bins_handcrafted,
            mfcc_coeffs: cfg.mfcc_coeffs,
            catalog: FunctionalCatalog::default(),
        })
    }

    /// Expected input width for a handcrafted DNN on the given features.
    pub fn functional_dim(&self, feature_set: FeatureSet) -> usize {
        let n_llds = match feature_set {
            FeatureSet::LogMel => self.mel_bins_handcrafted,
            FeatureSet::Mfcc => self.mfcc_coeffs,
        };
        n_llds * self.catalog.len()
    }

    pub fn segment_features(&self, seg: &Segment) -> Result<SegmentFeatures> {
        let power = stft_power(seg.samples(), &self.stft)?;
        let mel_handcrafted = log_mel(&power, &self.fb_handcrafted)?;
        let mel_image = log_mel(&power, &self.fb_image)?;
        let mel_audio = log_mel(&power, &self.fb_audio)?;
        let coeffs = mfcc(
            &mel_handcrafted,
            self.mel_bins_handcrafted,
            self.mfcc_coeffs,
        )?;

        let functionals_logmel =
            apply_functionals(mel_handcrafted.values(), "logmel", &self.catalog)?;
        let functionals_mfcc = apply_functionals(&coeffs, "mfcc", &self.catalog)?;
        let n_frames = mel_image.n_frames();

        Ok(SegmentFeatures {
            functionals_logmel: functionals_logmel.into_values(),
            functionals_mfcc: functionals_mfcc.into_values(),
            logmel_image: mel_image.into_values().into_data(),
            logmel_audio: mel_audio.into_values().into_data(),
            n_frames,
        })
    }

    /// Resamples to the pipeline rate, segments, and extracts each piece.
    pub fn clip_features(&self, clip: &AudioClip) -> Result<Vec<SegmentFeatures>> {
        let clip = resample(clip, self.sample_rate_hz)?;
        segment(&clip, self.segment_len)?
            .iter()
            .map(|seg| self.segment_features(seg))
            .collect()
    }

    pub fn file_features(&self, path: &Path) -> Result<Vec<SegmentFeatures>> {
        let clip = decode_wav(path)?;
        self.clip_features(&clip)
    }
}

/// Extracts every manifest file. Relative manifest paths are resolved
/// against `base_dir` (conventionally the manifest's directory).
pub fn prepare_corpus(
    entries: &[ManifestEntry],
    base_dir: &Path,
    cfg: &Config,
) -> Result<PreparedCorpus> {
    let extractor = FeatureExtractor::new(cfg)?;
    let files = entries
        .iter()
        .map(|entry| {
            let resolved = if entry.path.is_absolute() {
                entry.path.clone()
            } else {
                base_dir.join(&entry.path)
            };
            Ok(FileFeatures {
                path: entry.path.clone(),
                label: entry.label,
                fold: entry.fold,
                segments: extractor.file_features(&resolved)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedCorpus { files })
}
