//! Multi-model fusion: six ways to combine per-segment model outputs.
//!
//! Feature-level strategies operate on the stacked 256-d embeddings
//! ([`EmbeddingStack`]) and feed a fused vector into a final linear layer;
//! decision-level strategies combine the per-model probabilities (max,
//! average) or learn a weighting over per-model scores (attention).
//!
//! The attention heads share one map across models — models play the role
//! of positions in a kernel-1 convolution, so a [`Linear`] applied to the
//! `[n_models × 256]` stack is exactly that convolution and keeps every
//! head agnostic to the member count. Both attention normalizations are
//! sum-to-one over sigmoid gates, so with zero-initialized gate weights
//! they degenerate to the corresponding average strategy *bitwise*: the
//! fused sums are computed as `Σ a·x / Σ a`, and with every gate at 0.5
//! numerator and denominator carry an exact factor of ½, making the
//! division round identically to the plain mean.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::models::{ModelKind, ModelOutput, ModelSpec, EMBED_DIM};
use crate::nnet::{
    bce_with_logits, lr_at, mixup, sigmoid_scalar, Adam, AdamConfig, Linear, MixupConfig, Param,
    ParamInfo, Tensor,
};

/// The six fusion strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    FeatureMax,
    FeatureAvg,
    FeatureAttention,
    DecisionMax,
    DecisionAvg,
    DecisionAttention,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 6] = [
        FusionStrategy::FeatureMax,
        FusionStrategy::FeatureAvg,
        FusionStrategy::FeatureAttention,
        FusionStrategy::DecisionMax,
        FusionStrategy::DecisionAvg,
        FusionStrategy::DecisionAttention,
    ];

    /// Max and average decision fusion carry no parameters; everything
    /// else owns at least a final linear layer and needs training.
    pub fn is_trainable(&self) -> bool {
        !matches!(
            self,
            FusionStrategy::DecisionMax | FusionStrategy::DecisionAvg
        )
    }
}

impl std::fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FusionStrategy::FeatureMax => "feature_max",
            FusionStrategy::FeatureAvg => "feature_avg",
            FusionStrategy::FeatureAttention => "feature_attention",
            FusionStrategy::DecisionMax => "decision_max",
            FusionStrategy::DecisionAvg => "decision_avg",
            FusionStrategy::DecisionAttention => "decision_attention",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionStrategy::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| {
                Error::InvalidArg(format!(
                    "unknown fusion strategy `{s}` (expected feature_max, feature_avg, \
                     feature_attention, decision_max, decision_avg, or decision_attention)"
                ))
            })
    }
}

/// One segment's embeddings from every ensemble member, `[n_models × 256]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStack {
    reps: Mat,
}

impl EmbeddingStack {
    pub fn new(reps: Mat) -> Result<EmbeddingStack> {
        if reps.rows() < 2 {
            return Err(Error::InvalidArg(format!(
                "fusion needs at least 2 model embeddings, got {}",
                reps.rows()
            )));
        }
        if reps.cols() != EMBED_DIM {
            return Err(Error::Shape(format!(
                "embeddings must be {EMBED_DIM}-d, got {}",
                reps.cols()
            )));
        }
        if !reps.is_finite() {
            return Err(Error::NonFinite("embedding stack".into()));
        }
        Ok(EmbeddingStack { reps })
    }

    pub fn from_outputs(outputs: &[ModelOutput]) -> Result<EmbeddingStack> {
        let rows: Vec<Vec<f64>> = outputs.iter().map(|o| o.embedding.clone()).collect();
        EmbeddingStack::new(Mat::from_rows(&rows)?)
    }

    pub fn n_models(&self) -> usize {
        self.reps.rows()
    }

    pub fn reps(&self) -> &Mat {
        &self.reps
    }

    /// Row-major flat view, used by mixup during fusion training.
    pub fn flat(&self) -> &[f64] {
        self.reps.data()
    }

    pub fn from_flat(n_models: usize, flat: Vec<f64>) -> Result<EmbeddingStack> {
        EmbeddingStack::new(Mat::from_vec(n_models, EMBED_DIM, flat)?)
    }

    fn as_tensor(&self) -> Tensor {
        Tensor::from_vec(
            &[self.reps.rows(), self.reps.cols()],
            self.reps.data().to_vec(),
        )
        .expect("stack dimensions are self-consistent")
    }
}

/// Largest probability wins.
pub fn decision_max(probs: &[f64]) -> Result<f64> {
    validate_probs(probs)?;
    Ok(probs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Plain mean of the member probabilities.
pub fn decision_avg(probs: &[f64]) -> Result<f64> {
    validate_probs(probs)?;
    Ok(probs.iter().sum::<f64>() / probs.len() as f64)
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidArg("no probabilities to fuse".into()));
    }
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArg(format!("probability {p} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Checks that an ensemble is fusable: at least two members, each of a
/// different model kind (same-kind duplicates would just echo one model).
pub fn validate_members(kinds: &[ModelKind]) -> Result<()> {
    if kinds.len() < 2 {
        return Err(Error::InvalidArg(format!(
            "fusion needs at least 2 member models, got {}",
            kinds.len()
        )));
    }
    for (i, a) in kinds.iter().enumerate() {
        if kinds[..i].contains(a) {
            return Err(Error::InvalidArg(format!(
                "duplicate member model kind {a}"
            )));
        }
    }
    Ok(())
}

/// Reference to one trained ensemble member inside a fusion checkpoint.
///
/// The content hash pins the exact member parameters the head was trained
/// against, so a stale mix of checkpoints is detected at load time rather
/// than silently producing garbage scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionMemberRef {
    pub spec: ModelSpec,
    pub file_sha256: String,
}

/// Checkpoint header for a fusion head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub strategy: FusionStrategy,
    pub members: Vec<FusionMemberRef>,
}

impl FusionSpec {
    pub fn member_kinds(&self) -> Vec<ModelKind> {
        self.members.iter().map(|m| m.spec.kind()).collect()
    }
}

/// A fusion strategy together with whatever parameters it owns.
#[derive(Debug, Clone)]
pub enum FusionHead {
    FeatureMax { out: Linear },
    FeatureAvg { out: Linear },
    FeatureAttention { attn: Linear, out: Linear },
    DecisionMax,
    DecisionAvg,
    DecisionAttention { value: Linear, weight: Linear },
}

/// Forward activations for [`FusionHead::backward`].
#[derive(Debug)]
pub enum FusionCache {
    FeatureMax {
        x: Tensor,
        fused: Tensor,
        argmax: Vec<usize>,
    },
    FeatureAvg {
        x: Tensor,
        fused: Tensor,
    },
    FeatureAttention {
        x: Tensor,
        a: Tensor,
        gate_sum: Vec<f64>,
        fused: Tensor,
    },
    DecisionAttention {
        x: Tensor,
        v: Tensor,
        u: Tensor,
        gate_sum: f64,
        logit: f64,
    },
}

impl FusionHead {
    pub fn new(strategy: FusionStrategy) -> FusionHead {
        match strategy {
            FusionStrategy::FeatureMax => FusionHead::FeatureMax {
                out: Linear::new("fusion.out", EMBED_DIM, 1),
            },
            FusionStrategy::FeatureAvg => FusionHead::FeatureAvg {
                out: Linear::new("fusion.out", EMBED_DIM, 1),
            },
            FusionStrategy::FeatureAttention => FusionHead::FeatureAttention {
                attn: Linear::new("fusion.attn", EMBED_DIM, EMBED_DIM),
                out: Linear::new("fusion.out", EMBED_DIM, 1),
            },
            FusionStrategy::DecisionMax => FusionHead::DecisionMax,
            FusionStrategy::DecisionAvg => FusionHead::DecisionAvg,
            FusionStrategy::DecisionAttention => FusionHead::DecisionAttention {
                value: Linear::new("fusion.value", EMBED_DIM, 1),
                weight: Linear::new("fusion.weight", EMBED_DIM, 1),
            },
        }
    }

    pub fn strategy(&self) -> FusionStrategy {
        match self {
            FusionHead::FeatureMax { .. } => FusionStrategy::FeatureMax,
            FusionHead::FeatureAvg { .. } => FusionStrategy::FeatureAvg,
            FusionHead::FeatureAttention { .. } => FusionStrategy::FeatureAttention,
            FusionHead::DecisionMax => FusionStrategy::DecisionMax,
            FusionHead::DecisionAvg => FusionStrategy::DecisionAvg,
            FusionHead::DecisionAttention { .. } => FusionStrategy::DecisionAttention,
        }
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        match self {
            FusionHead::FeatureMax { out } | FusionHead::FeatureAvg { out } => out.init(rng),
            FusionHead::FeatureAttention { attn, out } => {
                attn.init(rng);
                out.init(rng);
            }
            FusionHead::DecisionMax | FusionHead::DecisionAvg => {}
            FusionHead::DecisionAttention { value, weight } => {
                value.init(rng);
                weight.init(rng);
            }
        }
    }

    /// Final probability for one segment given every member's output, in
    /// member order. This is the inference entry point for all six
    /// strategies.
    pub fn score(&self, outputs: &[ModelOutput]) -> Result<f64> {
        match self {
            FusionHead::DecisionMax => {
                let probs: Vec<f64> = outputs.iter().map(ModelOutput::probability).collect();
                decision_max(&probs)
            }
            FusionHead::DecisionAvg => {
                let probs: Vec<f64> = outputs.iter().map(ModelOutput::probability).collect();
                decision_avg(&probs)
            }
            _ => {
                let stack = EmbeddingStack::from_outputs(outputs)?;
                let (logit, _) = self.forward(&stack)?;
                Ok(sigmoid_scalar(logit))
            }
        }
    }

    /// Fused logit for one stack. Only meaningful for the four heads with
    /// parameters; the probability-only strategies have no logit path.
    pub fn forward(&self, stack: &EmbeddingStack) -> Result<(f64, FusionCache)> {
        let x = stack.as_tensor();
        let (m, d) = (stack.n_models(), EMBED_DIM);
        match self {
            FusionHead::FeatureMax { out } => {
                let mut fused = vec![f64::NEG_INFINITY; d];
                let mut argmax = vec![0usize; d];
                for (row, rep) in stack.reps().iter_rows().enumerate() {
                    for (c, &v) in rep.iter().enumerate() {
                        // Strictly-greater keeps ties at the lowest row.
                        if v > fused[c] {
                            fused[c] = v;
                            argmax[c] = row;
                        }
                    }
                }
                let fused = Tensor::from_vec(&[1, d], fused)?;
                let logit = out.forward(&fused)?.data()[0];
                Ok((logit, FusionCache::FeatureMax { x, fused, argmax }))
            }
            FusionHead::FeatureAvg { out } => {
                let mut fused = vec![0.0; d];
                for rep in stack.reps().iter_rows() {
                    for (c, &v) in rep.iter().enumerate() {
                        fused[c] += v;
                    }
                }
                for v in &mut fused {
                    *v /= m as f64;
                }
                let fused = Tensor::from_vec(&[1, d], fused)?;
                let logit = out.forward(&fused)?.data()[0];
                Ok((logit, FusionCache::FeatureAvg { x, fused }))
            }
            FusionHead::FeatureAttention { attn, out } => {
                let z = attn.forward(&x)?;
                let mut a = z.clone();
                for v in a.data_mut() {
                    *v = sigmoid_scalar(*v);
                }
                // Per channel: fused = Σₘ a·x / Σₘ a. Sigmoid output is
                // strictly positive, so the gate sum never vanishes.
                let mut num = vec![0.0; d];
                let mut gate_sum = vec![0.0; d];
                for row in 0..m {
                    let (ar, xr) = (a.row(row), x.row(row));
                    for c in 0..d {
                        num[c] += ar[c] * xr[c];
                        gate_sum[c] += ar[c];
                    }
                }
                let fused_vals: Vec<f64> =
                    num.iter().zip(&gate_sum).map(|(&n, &s)| n / s).collect();
                let fused = Tensor::from_vec(&[1, d], fused_vals)?;
                let logit = out.forward(&fused)?.data()[0];
                Ok((
                    logit,
                    FusionCache::FeatureAttention {
                        x,
                        a,
                        gate_sum,
                        fused,
                    },
                ))
            }
            FusionHead::DecisionAttention { value, weight } => {
                let v = value.forward(&x)?;
                let mut u = weight.forward(&x)?;
                for g in u.data_mut() {
                    *g = sigmoid_scalar(*g);
                }
                let gate_sum: f64 = u.data().iter().sum();
                let num: f64 = u
                    .data()
                    .iter()
                    .zip(v.data())
                    .map(|(&g, &val)| g * val)
                    .sum();
                let logit = num / gate_sum;
                Ok((
                    logit,
                    FusionCache::DecisionAttention {
                        x,
                        v,
                        u,
                        gate_sum,
                        logit,
                    },
                ))
            }
            FusionHead::DecisionMax | FusionHead::DecisionAvg => Err(Error::InvalidArg(format!(
                "{} fuses probabilities, not embeddings",
                self.strategy()
            ))),
        }
    }

    /// Accumulates parameter gradients for ∂loss/∂logit and returns the
    /// gradient w.r.t. the stack (useful for verification; members stay
    /// frozen during training, so callers usually drop it).
    pub fn backward(&mut self, cache: &FusionCache, dlogit: f64) -> Result<Mat> {
        match (self, cache) {
            (FusionHead::FeatureMax { out }, FusionCache::FeatureMax { x, fused, argmax }) => {
                let grad = Tensor::from_vec(&[1, 1], vec![dlogit])?;
                let dfused = out.backward(fused, &grad)?;
                let (m, d) = (x.shape()[0], x.shape()[1]);
                let mut dstack = Mat::zeros(m, d);
                for (c, &row) in argmax.iter().enumerate() {
                    dstack.set(row, c, dfused.data()[c]);
                }
                Ok(dstack)
            }
            (FusionHead::FeatureAvg { out }, FusionCache::FeatureAvg { x, fused }) => {
                let grad = Tensor::from_vec(&[1, 1], vec![dlogit])?;
                let dfused = out.backward(fused, &grad)?;
                let (m, d) = (x.shape()[0], x.shape()[1]);
                let mut dstack = Mat::zeros(m, d);
                for row in 0..m {
                    for c in 0..d {
                        dstack.set(row, c, dfused.data()[c] / m as f64);
                    }
                }
                Ok(dstack)
            }
            (
                FusionHead::FeatureAttention { attn, out },
                FusionCache::FeatureAttention {
                    x,
                    a,
                    gate_sum,
                    fused,
                },
            ) => {
                let grad = Tensor::from_vec(&[1, 1], vec![dlogit])?;
                let dfused = out.backward(fused, &grad)?;
                let (m, d) = (x.shape()[0], x.shape()[1]);
                // fused[c] = Σₘ a·x / s with s = Σₘ a, so
                //   ∂fused[c]/∂a[r,c] = (x[r,c] − fused[c]) / s[c]
                //   ∂fused[c]/∂x[r,c] = a[r,c] / s[c]
                let mut dz = Tensor::zeros(&[m, d]);
                let mut dstack = Mat::zeros(m, d);
                for row in 0..m {
                    for c in 0..d {
                        let da = dfused.data()[c] * (x.row(row)[c] - fused.data()[c]) / gate_sum[c];
                        let av = a.row(row)[c];
                        dz.row_mut(row)[c] = da * av * (1.0 - av);
                        dstack.set(row, c, dfused.data()[c] * av / gate_sum[c]);
                    }
                }
                let dx_attn = attn.backward(x, &dz)?;
                for row in 0..m {
                    for c in 0..d {
                        dstack.set(row, c, dstack.get(row, c) + dx_attn.row(row)[c]);
                    }
                }
                Ok(dstack)
            }
            (
                FusionHead::DecisionAttention { value, weight },
                FusionCache::DecisionAttention {
                    x,
                    v,
                    u,
                    gate_sum,
                    logit,
                },
            ) => {
                let (m, d) = (x.shape()[0], x.shape()[1]);
                // logit = Σₘ u·v / Σₘ u, so
                //   ∂logit/∂v[r] = u[r] / Σu
                //   ∂logit/∂u[r] = (v[r] − logit) / Σu
                let mut dv = Tensor::zeros(&[m, 1]);
                let mut dzu = Tensor::zeros(&[m, 1]);
                for row in 0..m {
                    let uv = u.data()[row];
                    dv.data_mut()[row] = dlogit * uv / gate_sum;
                    let du = dlogit * (v.data()[row] - logit) / gate_sum;
                    dzu.data_mut()[row] = du * uv * (1.0 - uv);
                }
                let dx_v = value.backward(x, &dv)?;
                let dx_u = weight.backward(x, &dzu)?;
                let mut dstack = Mat::zeros(m, d);
                for row in 0..m {
                    for c in 0..d {
                        dstack.set(row, c, dx_v.row(row)[c] + dx_u.row(row)[c]);
                    }
                }
                Ok(dstack)
            }
            _ => Err(Error::InvalidArg(
                "forward cache belongs to a different fusion strategy".into(),
            )),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            FusionHead::FeatureMax { out } | FusionHead::FeatureAvg { out } => out.params(),
            FusionHead::FeatureAttention { attn, out } => [attn.params(), out.params()].concat(),
            FusionHead::DecisionMax | FusionHead::DecisionAvg => Vec::new(),
            FusionHead::DecisionAttention { value, weight } => {
                [value.params(), weight.params()].concat()
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            FusionHead::FeatureMax { out } | FusionHead::FeatureAvg { out } => out.params_mut(),
            FusionHead::FeatureAttention { attn, out } => {
                let mut ps = attn.params_mut();
                ps.extend(out.params_mut());
                ps
            }
            FusionHead::DecisionMax | FusionHead::DecisionAvg => Vec::new(),
            FusionHead::DecisionAttention { value, weight } => {
                let mut ps = value.params_mut();
                ps.extend(weight.params_mut());
                ps
            }
        }
    }

    pub fn load_params(&mut self, blobs: &[(ParamInfo, Vec<f64>)]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != blobs.len() {
            return Err(Error::Checkpoint {
                path: std::path::PathBuf::new(),
                reason: format!(
                    "fusion head has {} parameters, checkpoint has {}",
                    params.len(),
                    blobs.len()
                ),
            });
        }
        for (param, (info, values)) in params.iter_mut().zip(blobs) {
            if param.name() != info.name || param.value.shape() != info.shape.as_slice() {
                return Err(Error::Checkpoint {
                    path: std::path::PathBuf::new(),
                    reason: format!(
                        "parameter mismatch: head {}{:?} vs checkpoint {}{:?}",
                        param.name(),
                        param.value.shape(),
                        info.name,
                        info.shape
                    ),
                });
            }
            param.value.data_mut().copy_from_slice(values);
        }
        Ok(())
    }
}

/// Trains a fusion head on frozen-member embedding stacks.
///
/// Members are never touched — callers extract each segment's stack with
/// the trained single models once and pass the results here. The head is
/// re-initialized from `seed`, so the outcome is a pure function of
/// (examples, config, seed). The recipe matches single-model training:
/// Adam with the step-decayed learning rate, class-weighted cross-entropy,
/// and (when enabled) mixup applied to flattened stacks, with mixed pairs
/// trained *alongside* their originals.
///
/// Returns the mean training loss per epoch. The parameter-free decision
/// strategies skip training and return an empty curve.
pub fn train_fusion(
    head: &mut FusionHead,
    examples: &[(EmbeddingStack, f64)],
    cfg: &Config,
    seed: u64,
) -> Result<Vec<f64>> {
    if !head.strategy().is_trainable() {
        return Ok(Vec::new());
    }
    if examples.is_empty() {
        return Err(Error::InvalidArg(
            "no training examples for fusion head".into(),
        ));
    }
    let n_models = examples[0].0.n_models();
    for (stack, label) in examples {
        if stack.n_models() != n_models {
            return Err(Error::Shape(format!(
                "inconsistent member count in training stacks: {} vs {n_models}",
                stack.n_models()
            )));
        }
        if !(0.0..=1.0).contains(label) {
            return Err(Error::InvalidArg(format!("label {label} outside [0, 1]")));
        }
    }
    let n_pos = examples.iter().filter(|(_, y)| *y >= 0.5).count();
    let pos_weight = cfg.pos_weight.resolve(examples.len() - n_pos, n_pos)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    head.init(&mut rng);
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
            let mut batch: Vec<(EmbeddingStack, f64)> = chunk
                .iter()
                .map(|&i| (examples[i].0.clone(), examples[i].1))
                .collect();
            if mixup_cfg.enabled {
                let originals = batch.len();
                for i in 0..originals {
                    let j = rng.random_range(0..originals);
                    let (x, y) = mixup(
                        batch[i].0.flat(),
                        batch[i].1,
                        batch[j].0.flat(),
                        batch[j].1,
                        &mut rng,
                        &mixup_cfg,
                    )?;
                    batch.push((EmbeddingStack::from_flat(n_models, x)?, y));
                }
            }

            let mut logits = Vec::with_capacity(batch.len());
            let mut caches = Vec::with_capacity(batch.len());
            for (stack, _) in &batch {
                let (logit, cache) = head.forward(stack)?;
                logits.push(logit);
                caches.push(cache);
            }
            let targets: Vec<f64> = batch.iter().map(|(_, y)| *y).collect();
            let loss = bce_with_logits(&logits, &targets, pos_weight)?;
            for (cache, &dlogit) in caches.iter().zip(&loss.dlogits) {
                head.backward(cache, dlogit)?;
            }
            opt.step(&mut head.params_mut(), lr)?;
            loss_sum += loss.loss * batch.len() as f64;
            n_scored += batch.len();
        }
        curve.push(loss_sum / n_scored as f64);
    }
    Ok(curve)
}
