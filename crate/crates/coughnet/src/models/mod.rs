//! The three single-model classifiers.
//!
//! All share the [`ClassifierHead`] (input → 1024 → 256 → 1) and therefore
//! all expose a 256-d embedding — the contract the fusion heads build on:
//!
//! * `handcrafted_dnn` — the head applied directly to a functional feature
//!   vector (log-Mel or MFCC statistics).
//! * `spec_cnn_a` / `spec_cnn_b` — a small convolutional backbone over
//!   log-Mel spectrograms (128 and 64 Mel bins respectively): two kernel-3
//!   convolution blocks over time with Mel bins as input channels, each
//!   ReLU + length-2 max-pool, then concatenated global average and max
//!   pooling into the head. The two resolutions plus independent seeds
//!   keep the ensemble members diverse, which is what fusion exploits.

mod head;

pub use head::{ClassifierHead, HeadCache};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::{
    global_avg_max_pool, global_avg_max_pool_backward, max_pool1d_2, max_pool1d_2_backward, relu,
    relu_backward, sigmoid_scalar, Conv1dK3, Param, PoolCache, Tensor,
};

/// Embedding width shared by every model kind.
pub const EMBED_DIM: usize = 256;
/// First hidden layer of the classifier head.
pub const HIDDEN_DIM: usize = 1024;
/// Default backbone channel widths (first and second convolution block).
pub const CNN_CHANNELS: [usize; 2] = [32, 64];

/// Which of the three classifier families a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    HandcraftedDnn,
    SpecCnnA,
    SpecCnnB,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::HandcraftedDnn => "handcrafted_dnn",
            ModelKind::SpecCnnA => "spec_cnn_a",
            ModelKind::SpecCnnB => "spec_cnn_b",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "handcrafted_dnn" => Ok(ModelKind::HandcraftedDnn),
            "spec_cnn_a" => Ok(ModelKind::SpecCnnA),
            "spec_cnn_b" => Ok(ModelKind::SpecCnnB),
            other => Err(Error::InvalidArg(format!(
                "unknown model kind `{other}` (expected handcrafted_dnn, spec_cnn_a, or spec_cnn_b)"
            ))),
        }
    }
}

/// Which functional feature set feeds the handcrafted DNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    #[serde(rename = "logmel")]
    LogMel,
    Mfcc,
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureSet::LogMel => "logmel",
            FeatureSet::Mfcc => "mfcc",
        })
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logmel" => Ok(FeatureSet::LogMel),
            "mfcc" => Ok(FeatureSet::Mfcc),
            other => Err(Error::InvalidArg(format!(
                "unknown feature set `{other}` (expected logmel or mfcc)"
            ))),
        }
    }
}

/// Serializable architecture description; stored in checkpoint headers and
/// sufficient to rebuild the parameter-less model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    HandcraftedDnn {
        feature_set: FeatureSet,
        input_dim: usize,
    },
    SpecCnnA {
        n_mels: usize,
        conv_channels: [usize; 2],
    },
    SpecCnnB {
        n_mels: usize,
        conv_channels: [usize; 2],
    },
}

impl ModelSpec {
    pub fn dnn(feature_set: FeatureSet, input_dim: usize) -> ModelSpec {
        ModelSpec::HandcraftedDnn {
            feature_set,
            input_dim,
        }
    }

    pub fn cnn_a(n_mels: usize) -> ModelSpec {
        ModelSpec::SpecCnnA {
            n_mels,
            conv_channels: CNN_CHANNELS,
        }
    }

    pub fn cnn_b(n_mels: usize) -> ModelSpec {
        ModelSpec::SpecCnnB {
            n_mels,
            conv_channels: CNN_CHANNELS,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::HandcraftedDnn { .. } => ModelKind::HandcraftedDnn,
            ModelSpec::SpecCnnA { .. } => ModelKind::SpecCnnA,
            ModelSpec::SpecCnnB { .. } => ModelKind::SpecCnnB,
        }
    }

    /// Builds the model with zero parameters; call [`SingleModel::init`]
    /// to make it trainable.
    pub fn build(&self) -> Result<SingleModel> {
        match *self {
            ModelSpec::HandcraftedDnn { input_dim, .. } => {
                if input_dim == 0 {
                    return Err(Error::InvalidArg("input_dim must be positive".into()));
                }
                Ok(SingleModel::Dnn {
                    spec: self.clone(),
                    head: ClassifierHead::new("head", input_dim),
                })
            }
            ModelSpec::SpecCnnA {
                n_mels,
                conv_channels,
            }
            | ModelSpec::SpecCnnB {
                n_mels,
                conv_channels,
            } => {
                let [c1, c2] = conv_channels;
                if n_mels == 0 || c1 == 0 || c2 == 0 {
                    return Err(Error::InvalidArg(
                        "n_mels and conv channels must be positive".into(),
                    ));
                }
                Ok(SingleModel::Cnn {
                    spec: self.clone(),
                    conv1: Conv1dK3::new("conv1", n_mels, c1),
                    conv2: Conv1dK3::new("conv2", c1, c2),
                    head: ClassifierHead::new("head", 2 * c2),
                })
            }
        }
    }
}

/// One model's verdict on one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub logit: f64,
    pub embedding: Vec<f64>,
}

impl ModelOutput {
    /// σ(logit) — the segment-level positive-class probability.
    pub fn probability(&self) -> f64 {
        sigmoid_scalar(self.logit)
    }
}

/// A buildable, trainable classifier of any of the three kinds.
#[derive(Debug, Clone)]
pub enum SingleModel {
    Dnn {
        spec: ModelSpec,
        head: ClassifierHead,
    },
    Cnn {
        spec: ModelSpec,
        conv1: Conv1dK3,
        conv2: Conv1dK3,
        head: ClassifierHead,
    },
}

/// Forward activations kept for [`SingleModel::backward_batch`].
#[derive(Debug)]
pub enum BatchCache {
    Dnn {
        head: HeadCache,
    },
    Cnn {
        x: Tensor,
        z1: Tensor,
        pool1: PoolCache,
        p1: Tensor,
        z2: Tensor,
        pool2: PoolCache,
        global: PoolCache,
        head: HeadCache,
    },
}

impl BatchCache {
    /// `[batch × 256]` embeddings from this forward pass.
    pub fn embeddings(&self) -> &Tensor {
        match self {
            BatchCache::Dnn { head } | BatchCache::Cnn { head, .. } => head.embeddings(),
        }
    }
}

impl SingleModel {
    pub fn spec(&self) -> &ModelSpec {
        match self {
            SingleModel::Dnn { spec, .. } | SingleModel::Cnn { spec, .. } => spec,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.spec().kind()
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        match self {
            SingleModel::Dnn { head, .. } => head.init(rng),
            SingleModel::Cnn {
                conv1, conv2, head, ..
            } => {
                conv1.init(rng);
                conv2.init(rng);
                head.init(rng);
            }
        }
    }

    /// Expected flat input length per sample, if the architecture pins one.
    /// CNN inputs are `n_mels × n_frames` with free `n_frames`, so only
    /// the Mel count is validated there.
    pub fn input_dim(&self) -> Option<usize> {
        match self.spec() {
            ModelSpec::HandcraftedDnn { input_dim, .. } => Some(*input_dim),
            _ => None,
        }
    }

    pub fn n_mels(&self) -> Option<usize> {
        match self.spec() {
            ModelSpec::HandcraftedDnn { .. } => None,
            ModelSpec::SpecCnnA { n_mels, .. } | ModelSpec::SpecCnnB { n_mels, .. } => {
                Some(*n_mels)
            }
        }
    }

    /// Shapes a batch of flat per-sample inputs for this model kind.
    pub fn batch_tensor(&self, flat: Vec<f64>, batch: usize) -> Result<Tensor> {
        match self.spec() {
            ModelSpec::HandcraftedDnn { input_dim, .. } => {
                Tensor::from_vec(&[batch, *input_dim], flat)
            }
            ModelSpec::SpecCnnA { n_mels, .. } | ModelSpec::SpecCnnB { n_mels, .. } => {
                if batch == 0 || flat.len() % (batch * n_mels) != 0 {
                    return Err(Error::Shape(format!(
                        "{} values do not form [{batch} × {n_mels} × frames]",
                        flat.len()
                    )));
                }
                let frames = flat.len() / (batch * n_mels);
                Tensor::from_vec(&[batch, *n_mels, frames], flat)
            }
        }
    }

    /// `(logits, cache)` for one batch; the cache also carries the
    /// embeddings.
    pub fn forward_batch(&self, x: &Tensor) -> Result<(Vec<f64>, BatchCache)> {
        match self {
            SingleModel::Dnn { head, .. } => {
                let (logits, cache) = head.forward(x)?;
                Ok((logits, BatchCache::Dnn { head: cache }))
            }
            SingleModel::Cnn {
                conv1, conv2, head, ..
            } => {
                if x.shape().len() != 3 || x.shape()[2] < 4 {
                    return Err(Error::Shape(format!(
                        "backbone expects [batch × n_mels × frames ≥ 4], got {:?}",
                        x.shape()
                    )));
                }
                let z1 = conv1.forward(x)?;
                let a1 = relu(&z1);
                let (p1, pool1) = max_pool1d_2(&a1)?;
                let z2 = conv2.forward(&p1)?;
                let a2 = relu(&z2);
                let (p2, pool2) = max_pool1d_2(&a2)?;
                let (g, global) = global_avg_max_pool(&p2)?;
                let (logits, head_cache) = head.forward(&g)?;
                Ok((
                    logits,
                    BatchCache::Cnn {
                        x: x.clone(),
                        z1,
                        pool1,
                        p1,
                        z2,
                        pool2,
                        global,
                        head: head_cache,
                    },
                ))
            }
        }
    }

    /// Accumulates gradients for one batch given ∂loss/∂logit.
    pub fn backward_batch(&mut self, cache: &BatchCache, dlogits: &[f64]) -> Result<()> {
        match (self, cache) {
            (SingleModel::Dnn { head, .. }, BatchCache::Dnn { head: hc }) => {
                head.backward(hc, dlogits)?;
                Ok(())
            }
            (
                SingleModel::Cnn {
                    conv1, conv2, head, ..
                },
                BatchCache::Cnn {
                    x,
                    z1,
                    pool1,
                    p1,
                    z2,
                    pool2,
                    global,
                    head: hc,
                },
            ) => {
                let dg = head.backward(hc, dlogits)?;
                let dp2 = global_avg_max_pool_backward(global, &dg)?;
                let da2 = max_pool1d_2_backward(pool2, &dp2)?;
                let dz2 = relu_backward(z2, &da2);
                let dp1 = conv2.backward(p1, &dz2)?;
                let da1 = max_pool1d_2_backward(pool1, &dp1)?;
                let dz1 = relu_backward(z1, &da1);
                conv1.backward(x, &dz1)?;
                Ok(())
            }
            _ => Err(Error::Shape(
                "forward cache belongs to a different model kind".into(),
            )),
        }
    }

    /// Scores one segment input (flat features or flat spectrogram).
    pub fn predict(&self, input: &[f64]) -> Result<ModelOutput> {
        if let Some(dim) = self.input_dim() {
            if input.len() != dim {
                return Err(Error::Shape(format!(
                    "expected {dim} features, got {}",
                    input.len()
                )));
            }
        }
        let x = self.batch_tensor(input.to_vec(), 1)?;
        let (logits, cache) = self.forward_batch(&x)?;
        Ok(ModelOutput {
            logit: logits[0],
            embedding: cache.embeddings().row(0).to_vec(),
        })
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            SingleModel::Dnn { head, .. } => head.params(),
            SingleModel::Cnn {
                conv1, conv2, head, ..
            } => [conv1.params(), conv2.params(), head.params()].concat(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            SingleModel::Dnn { head, .. } => head.params_mut(),
            SingleModel::Cnn {
                conv1, conv2, head, ..
            } => {
                let mut out = conv1.params_mut();
                out.extend(conv2.params_mut());
                out.extend(head.params_mut());
                out
            }
        }
    }

    /// Restores parameter values from a loaded checkpoint, matching by
    /// name and shape in order.
    pub fn load_params(&mut self, blobs: &[(crate::nnet::ParamInfo, Vec<f64>)]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != blobs.len() {
            return Err(Error::Checkpoint {
                path: std::path::PathBuf::new(),
                reason: format!(
                    "model has {} parameters, checkpoint has {}",
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
                        "parameter mismatch: model {}{:?} vs checkpoint {}{:?}",
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
