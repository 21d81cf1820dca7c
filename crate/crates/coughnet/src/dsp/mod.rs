//! Spectral analysis and handcrafted feature extraction.
//!
//! The chain is: windowed power spectrogram ([`stft_power`]) → triangular
//! Mel filterbank ([`mel_filterbank`]) → log compression ([`log_mel`]) →
//! optionally MFCCs ([`mfcc`]) → statistical functionals over the frame axis
//! ([`apply_functionals`]), yielding one fixed-length vector per segment.

mod functionals;
mod mel;
mod mfcc;
mod stft;

pub use functionals::{
    apply_functionals, FeatureLayout, FeatureVector, Functional, FunctionalCatalog,
};
pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_to_hz, LogMelSpectrogram, LOG_FLOOR};
pub use mfcc::mfcc;
pub use stft::{hann_window, stft_power, StftConfig};
