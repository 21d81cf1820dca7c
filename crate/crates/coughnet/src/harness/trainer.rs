//! The single-model training loop.
//!
//! Segments are the training unit; files only matter again at evaluation
//! time, when segment probabilities are averaged per file. Each epoch
//! shuffles the segment order with the seeded generator, walks it in
//! mini-batches, and — when mixup is on — extends every batch with one
//! mixed example per original (partner drawn from the same batch), so a
//! batch of 16 trains on 32 rows under a single optimizer step.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, SingleModel};
use crate::nnet::{bce_with_logits, lr_at, mixup, Adam, AdamConfig, MixupConfig};

/// One flat model input with its class label.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub input: Vec<f64>,
    pub label: f64,
}

/// Resolves the loss weighting from the split's own label counts.
pub fn resolve_pos_weight(examples: &[TrainExample], cfg: &Config) -> Result<f64> {
    let n_pos = examples.iter().filter(|e| e.label >= 0.5).count();
    cfg.pos_weight.resolve(examples.len() - n_pos, n_pos)
}

/// Trains a freshly initialized model on the given segments.
///
/// The model is built from `spec` and initialized from `seed`, so the
/// returned parameters are a pure function of (spec, examples, config,
/// seed). Returns the model together with its per-epoch mean training
/// loss.
pub fn train_single(
    spec: &ModelSpec,
    examples: &[TrainExample],
    cfg: &Config,
    seed: u64,
) -> Result<(SingleModel, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::InvalidArg("no training examples".into()));
    }
    let width = examples[0].input.len();
    for e in examples {
        if e.input.len() != width {
            return Err(Error::Shape(format!(
                "inconsistent example widths: {} vs {width}",
                e.input.len()
            )));
        }
        if !(0.0..=1.0).contains(&e.label) {
            return Err(Error::InvalidArg(format!(
                "label {} outside [0, 1]",
                e.label
            )));
        }
    }
    let pos_weight = resolve_pos_weight(examples, cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = spec.build()?;
    model.init(&mut rng);
    let mut opt = Adam::new(AdamConfig::default());
    let mixup_cfg = MixupConfig {
        enabled: cfg.mixup,
        beta_shape: cfg.mixup_beta,
    };

    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg.learning_rate, cfg.lr_decay, cfg.lr_decay_every);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_scored = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut flat = Vec::with_capacity(2 * chunk.len() * width);
            let mut targets = Vec::with_capacity(2 * chunk.len());
            for &i in chunk {
                flat.extend_from_slice(&examples[i].input);
                targets.push(examples[i].label);
            }
            if mixup_cfg.enabled {
                for k in 0..chunk.len() {
                    let a = &examples[chunk[k]];
                    let b = &examples[chunk[rng.random_range(0..chunk.len())]];
                    let (x, y) = mixup(&a.input, a.label, &b.input, b.label, &mut rng, &mixup_cfg)?;
                    flat.extend_from_slice(&x);
                    targets.push(y);
                }
            }

            let batch = model.batch_tensor(flat, targets.len())?;
            let (logits, cache) = model.forward_batch(&batch)?;
            let loss = bce_with_logits(&logits, &targets, pos_weight)?;
            model.backward_batch(&cache, &loss.dlogits)?;
            opt.step(&mut model.params_mut(), lr)?;
            loss_sum += loss.loss * targets.len() as f64;
            n_scored += targets.len();
        }
        curve.push(loss_sum / n_scored as f64);
    }
    Ok((model, curve))
}
