//! Pipeline configuration: flat `key = value` files with CLI overrides.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the positive-class weight of the training loss is chosen.
///
/// `Auto` uses `n_negative / n_positive` of the training split, which
/// up-weights the minority positive class. `AutoInverse` uses the reciprocal
/// ratio `n_positive / n_negative`; it is exposed so both weighting
/// directions can be compared on imbalanced data. `Fixed` pins an explicit
/// value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosWeightMode {
    Auto,
    AutoInverse,
    Fixed(f64),
}

impl PosWeightMode {
    pub fn resolve(self, n_negative: usize, n_positive: usize) -> Result<f64> {
        if matches!(self, PosWeightMode::Auto | PosWeightMode::AutoInverse)
            && (n_negative == 0 || n_positive == 0)
        {
            return Err(Error::Config(
                "cannot derive pos_weight from a single-class training split".into(),
            ));
        }
        let w = match self {
            PosWeightMode::Auto => n_negative as f64 / n_positive as f64,
            PosWeightMode::AutoInverse => n_positive as f64 / n_negative as f64,
            PosWeightMode::Fixed(w) => w,
        };
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::Config(format!(
                "pos_weight must be positive, got {w}"
            )));
        }
        Ok(w)
    }
}

impl fmt::Display for PosWeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PosWeightMode::Auto => write!(f, "auto"),
            PosWeightMode::AutoInverse => write!(f, "auto-inverse"),
            PosWeightMode::Fixed(w) => write!(f, "{w}"),
        }
    }
}

impl std::str::FromStr for PosWeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PosWeightMode::Auto),
            "auto-inverse" => Ok(PosWeightMode::AutoInverse),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite() && *w > 0.0)
                .map(PosWeightMode::Fixed)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "pos_weight must be `auto`, `auto-inverse`, or a positive number, got `{other}`"
                    ))
                }),
        }
    }
}

impl Serialize for PosWeightMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PosWeightMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All pipeline hyperparameters with their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub sample_rate: u32,
    pub segment_len: usize,
    pub stft_window: usize,
    pub stft_hop: usize,
    pub mel_bins_handcrafted: usize,
    pub mel_bins_image_slot: usize,
    pub mel_bins_audio_slot: usize,
    pub mfcc_coeffs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub mixup: bool,
    pub mixup_beta: f64,
    pub pos_weight: PosWeightMode,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sample_rate: 16_000,
            segment_len: 57_600,
            stft_window: 512,
            stft_hop: 256,
            mel_bins_handcrafted: 26,
            mel_bins_image_slot: 128,
            mel_bins_audio_slot: 64,
            mfcc_coeffs: 14,
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.001,
            lr_decay: 0.1,
            lr_decay_every: 10,
            mixup: true,
            mixup_beta: 1.0,
            pos_weight: PosWeightMode::Auto,
            seed: 42,
        }
    }
}

impl Config {
    /// Parses a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; unknown keys are rejected.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    i + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form, as used by config files and
    /// `--set key=value` overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "sample_rate" => self.sample_rate = parse(key, value)?,
            "segment_len" => self.segment_len = parse(key, value)?,
            "stft_window" => self.stft_window = parse(key, value)?,
            "stft_hop" => self.stft_hop = parse(key, value)?,
            "mel_bins_handcrafted" => self.mel_bins_handcrafted = parse(key, value)?,
            "mel_bins_image_slot" => self.mel_bins_image_slot = parse(key, value)?,
            "mel_bins_audio_slot" => self.mel_bins_audio_slot = parse(key, value)?,
            "mfcc_coeffs" => self.mfcc_coeffs = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "lr_decay" => self.lr_decay = parse(key, value)?,
            "lr_decay_every" => self.lr_decay_every = parse(key, value)?,
            "mixup" => self.mixup = parse(key, value)?,
            "mixup_beta" => self.mixup_beta = parse(key, value)?,
            "pos_weight" => self.pos_weight = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.segment_len < self.stft_window {
            return Err(Error::Config(
                "segment_len must cover one STFT window".into(),
            ));
        }
        if self.stft_hop == 0 || self.stft_hop > self.stft_window {
            return Err(Error::Config("stft_hop must be in (0, stft_window]".into()));
        }
        if !self.stft_window.is_power_of_two() {
            return Err(Error::Config("stft_window must be a power of two".into()));
        }
        if self.mfcc_coeffs == 0 || self.mfcc_coeffs > self.mel_bins_handcrafted {
            return Err(Error::Config(
                "mfcc_coeffs must be in 1..=mel_bins_handcrafted".into(),
            ));
        }
        for (name, v) in [
            ("mel_bins_handcrafted", self.mel_bins_handcrafted),
            ("mel_bins_image_slot", self.mel_bins_image_slot),
            ("mel_bins_audio_slot", self.mel_bins_audio_slot),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) || !(self.lr_decay > 0.0) {
            return Err(Error::Config(
                "learning_rate and lr_decay must be positive".into(),
            ));
        }
        if self.lr_decay_every == 0 {
            return Err(Error::Config("lr_decay_every must be positive".into()));
        }
        if !(self.mixup_beta > 0.0) {
            return Err(Error::Config("mixup_beta must be positive".into()));
        }
        Ok(())
    }

    /// Canonical `(key, value)` pairs in file order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("sample_rate".into(), self.sample_rate.to_string()),
            ("segment_len".into(), self.segment_len.to_string()),
            ("stft_window".into(), self.stft_window.to_string()),
            ("stft_hop".into(), self.stft_hop.to_string()),
            (
                "mel_bins_handcrafted".into(),
                self.mel_bins_handcrafted.to_string(),
            ),
            (
                "mel_bins_image_slot".into(),
                self.mel_bins_image_slot.to_string(),
            ),
            (
                "mel_bins_audio_slot".into(),
                self.mel_bins_audio_slot.to_string(),
            ),
            ("mfcc_coeffs".into(), self.mfcc_coeffs.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("learning_rate".into(), self.learning_rate.to_string()),
            ("lr_decay".into(), self.lr_decay.to_string()),
            ("lr_decay_every".into(), self.lr_decay_every.to_string()),
            ("mixup".into(), self.mixup.to_string()),
            ("mixup_beta".into(), self.mixup_beta.to_string()),
            ("pos_weight".into(), self.pos_weight.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }

    /// Renders the config in its file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
