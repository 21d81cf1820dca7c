//! The shared three-layer classifier head.

use rand::Rng;

use crate::error::Result;
use crate::nnet::{relu, relu_backward, Linear, Param, Tensor};

use super::{EMBED_DIM, HIDDEN_DIM};

/// Dense classifier: input → 1024 → 256 → 1 with ReLU after the first two
/// layers. The post-ReLU output of the middle 256-unit layer is the
/// embedding that fusion consumes, so every model kind exposes the same
/// 256-d representation.
#[derive(Debug, Clone)]
pub struct ClassifierHead {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
}

/// Activations saved by [`ClassifierHead::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct HeadCache {
    x: Tensor,
    z1: Tensor,
    a1: Tensor,
    z2: Tensor,
    embeddings: Tensor,
}

impl HeadCache {
    /// `[batch × 256]` post-ReLU embeddings.
    pub fn embeddings(&self) -> &Tensor {
        &self.embeddings
    }
}

impl ClassifierHead {
    pub fn new(name: &str, in_dim: usize) -> ClassifierHead {
        ClassifierHead {
            l1: Linear::new(&format!("{name}.l1"), in_dim, HIDDEN_DIM),
            l2: Linear::new(&format!("{name}.l2"), HIDDEN_DIM, EMBED_DIM),
            l3: Linear::new(&format!("{name}.l3"), EMBED_DIM, 1),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        self.l1.init(rng);
        self.l2.init(rng);
        self.l3.init(rng);
    }

    /// `[batch × in] → (logits [batch], cache)`.
    pub fn forward(&self, x: &Tensor) -> Result<(Vec<f64>, HeadCache)> {
        let z1 = self.l1.forward(x)?;
        let a1 = relu(&z1);
        let z2 = self.l2.forward(&a1)?;
        let embeddings = relu(&z2);
        let z3 = self.l3.forward(&embeddings)?;
        let logits = z3.data().to_vec();
        Ok((
            logits,
            HeadCache {
                x: x.clone(),
                z1,
                a1,
                z2,
                embeddings,
            },
        ))
    }

    /// Accumulates parameter gradients and returns ∂loss/∂x.
    pub fn backward(&mut self, cache: &HeadCache, dlogits: &[f64]) -> Result<Tensor> {
        let batch = cache.x.shape()[0];
        let dz3 = Tensor::from_vec(&[batch, 1], dlogits.to_vec())?;
        let demb = self.l3.backward(&cache.embeddings, &dz3)?;
        let dz2 = relu_backward(&cache.z2, &demb);
        let da1 = self.l2.backward(&cache.a1, &dz2)?;
        let dz1 = relu_backward(&cache.z1, &da1);
        self.l1.backward(&cache.x, &dz1)
    }

    pub fn params(&self) -> Vec<&Param> {
        [self.l1.params(), self.l2.params(), self.l3.params()].concat()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.l1.params_mut();
        out.extend(self.l2.params_mut());
        out.extend(self.l3.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}
