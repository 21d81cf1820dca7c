//! Cough-audio screening pipeline at desk scale.
//!
//! `coughnet` implements an end-to-end binary screening system for cough
//! recordings: WAV ingestion, resampling and segmentation, log-Mel and
//! cepstral feature extraction, three from-scratch classifier families,
//! six multi-model fusion strategies, and a five-fold cross-validation
//! harness reporting sensitivity, specificity, and AUC.
//!
//! The crate is organised along the pipeline:
//!
//! * [`audio`] — WAV decoding, windowed-sinc resampling, fixed-length
//!   segmentation, dataset manifests.
//! * [`dsp`] — STFT, Mel filterbanks, log-Mel spectrograms, MFCCs, and
//!   statistical functionals over low-level descriptors.
//! * [`nnet`] — a small differentiable-layer stack (dense, kernel-1 and
//!   kernel-3 1-D convolutions) with hand-written backward passes,
//!   weighted BCE-with-logits, Adam, a step LR schedule, and mixup.
//! * [`models`] — the three single-model classifiers, each exposing a
//!   256-d penultimate embedding.
//! * [`fusion`] — feature-level and decision-level max / average /
//!   attention fusion over the three models.
//! * [`harness`] — cross-validation driver and metric computation.
//! * [`synth`] — a deterministic synthetic-corpus generator for
//!   experiments without access to clinical data.
//!
//! A narrative guide with runnable examples lives in `book/`; its code
//! blocks are compiled and run by `cargo test --doc`.

pub mod audio;
pub mod config;
pub mod dsp;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod harness;
pub mod mat;
pub mod models;
pub mod nnet;
pub mod synth;

pub use config::Config;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
