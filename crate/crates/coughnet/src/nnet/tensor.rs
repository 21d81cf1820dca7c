//! Dense tensors and trainable parameters.

use crate::error::{Error, Result};

/// A dense row-major tensor of f64 values.
///
/// Shapes are dynamic (1-, 2-, and 3-dimensional in practice); the data
/// length always equals the product of the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Reinterprets the data under a new shape of equal element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} values) to {shape:?} ({expected})",
                self.shape,
                self.data.len()
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Row `i` of a 2-d tensor as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 2);
        let w = self.shape[1];
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        debug_assert_eq!(self.shape.len(), 2);
        let w = self.shape[1];
        &mut self.data[i * w..(i + 1) * w]
    }

    /// Channel `(n, c)` of a 3-d `[batch × channels × len]` tensor.
    pub fn lane(&self, n: usize, c: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 3);
        let (ch, len) = (self.shape[1], self.shape[2]);
        let start = (n * ch + c) * len;
        &self.data[start..start + len]
    }

    pub fn lane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        debug_assert_eq!(self.shape.len(), 3);
        let (ch, len) = (self.shape[1], self.shape[2]);
        let start = (n * ch + c) * len;
        &mut self.data[start..start + len]
    }

    /// Errors if any element is NaN or infinite — the stack treats
    /// non-finite activations as a bug, not a value.
    pub fn assert_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!(
                "{context}: tensor of shape {:?}",
                self.shape
            )))
        }
    }
}

/// A trainable tensor with its gradient accumulator and a stable name used
/// in checkpoints.
#[derive(Debug, Clone)]
pub struct Param {
    name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, shape: &[usize]) -> Param {
        Param {
            name: name.into(),
            value: Tensor::zeros(shape),
            grad: Tensor::zeros(shape),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }
}
