//! Layer vocabulary: dense, kernel-1 and kernel-3 1-d convolutions,
//! activations, and pooling.
//!
//! Forward methods are pure; backward methods take the same input the
//! forward saw (plus the upstream gradient), accumulate into the layer's
//! parameter gradients, and return the gradient with respect to the input.
//! Callers keep the activations between the two calls — there is no tape.

use rand::Rng;

use crate::error::{Error, Result};

use super::init::kaiming_uniform;
use super::tensor::{Param, Tensor};

/// Dense layer: y = xWᵀ + b with W of shape `[out × in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
}

impl Linear {
    /// Zero-initialized layer; call [`Linear::init`] for trainable use.
    pub fn new(name: &str, in_dim: usize, out_dim: usize) -> Linear {
        Linear {
            w: Param::new(format!("{name}.w"), &[out_dim, in_dim]),
            b: Param::new(format!("{name}.b"), &[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.w.value.shape()[0]
    }

    /// Kaiming-uniform weights, zero bias.
    pub fn init(&mut self, rng: &mut impl Rng) {
        let fan_in = self.in_dim();
        kaiming_uniform(rng, fan_in, self.w.value.data_mut());
        self.b.value.data_mut().fill(0.0);
    }

    /// `[batch × in] → [batch × out]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (out_dim, in_dim) = (self.out_dim(), self.in_dim());
        if x.shape().len() != 2 || x.shape()[1] != in_dim {
            return Err(Error::Shape(format!(
                "linear expects [batch × {in_dim}], got {:?}",
                x.shape()
            )));
        }
        let batch = x.shape()[0];
        let mut y = Tensor::zeros(&[batch, out_dim]);
        for n in 0..batch {
            let xr = x.row(n);
            let yr = y.row_mut(n);
            for o in 0..out_dim {
                let wr = self.w.value.row(o);
                let mut acc = self.b.value.data()[o];
                for (xi, wi) in xr.iter().zip(wr) {
                    acc += xi * wi;
                }
                yr[o] = acc;
            }
        }
        y.assert_finite("linear forward")?;
        Ok(y)
    }

    /// Accumulates weight/bias gradients and returns ∂loss/∂x.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (out_dim, in_dim) = (self.out_dim(), self.in_dim());
        let batch = x.shape()[0];
        if grad_out.shape() != [batch, out_dim] {
            return Err(Error::Shape(format!(
                "linear backward expects grad [{batch} × {out_dim}], got {:?}",
                grad_out.shape()
            )));
        }
        let mut grad_in = Tensor::zeros(&[batch, in_dim]);
        let db = self.b.grad.data_mut();
        for n in 0..batch {
            let xr = x.row(n);
            let gr = grad_out.row(n);
            for o in 0..out_dim {
                let g = gr[o];
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                let wr_grad = self.w.grad.row_mut(o);
                for (wg, xi) in wr_grad.iter_mut().zip(xr) {
                    *wg += g * xi;
                }
                let wr = self.w.value.row(o);
                let gi = grad_in.row_mut(n);
                for (gii, wi) in gi.iter_mut().zip(wr) {
                    *gii += g * wi;
                }
            }
        }
        grad_in.assert_finite("linear backward")?;
        Ok(grad_in)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

/// Kernel-1 1-d convolution: the same `[out_ch × in_ch]` linear map applied
/// independently at every length position of a `[batch × ch × len]` tensor.
#[derive(Debug, Clone)]
pub struct Conv1dK1 {
    pub w: Param,
    pub b: Param,
}

impl Conv1dK1 {
    pub fn new(name: &str, in_ch: usize, out_ch: usize) -> Conv1dK1 {
        Conv1dK1 {
            w: Param::new(format!("{name}.w"), &[out_ch, in_ch]),
            b: Param::new(format!("{name}.b"), &[out_ch]),
        }
    }

    pub fn in_ch(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn out_ch(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        let fan_in = self.in_ch();
        kaiming_uniform(rng, fan_in, self.w.value.data_mut());
        self.b.value.data_mut().fill(0.0);
    }

    /// `[batch × in_ch × len] → [batch × out_ch × len]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (out_ch, in_ch) = (self.out_ch(), self.in_ch());
        if x.shape().len() != 3 || x.shape()[1] != in_ch {
            return Err(Error::Shape(format!(
                "conv1d_k1 expects [batch × {in_ch} × len], got {:?}",
                x.shape()
            )));
        }
        let (batch, len) = (x.shape()[0], x.shape()[2]);
        let mut y = Tensor::zeros(&[batch, out_ch, len]);
        for n in 0..batch {
            for oc in 0..out_ch {
                let bias = self.b.value.data()[oc];
                y.lane_mut(n, oc).fill(bias);
                for ic in 0..in_ch {
                    let w = self.w.value.get2(oc, ic);
                    if w == 0.0 {
                        continue;
                    }
                    let xl = x.lane(n, ic);
                    let yl = y.lane_mut(n, oc);
                    for (yv, xv) in yl.iter_mut().zip(xl) {
                        *yv += w * xv;
                    }
                }
            }
        }
        y.assert_finite("conv1d_k1 forward")?;
        Ok(y)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (out_ch, in_ch) = (self.out_ch(), self.in_ch());
        let (batch, len) = (x.shape()[0], x.shape()[2]);
        if grad_out.shape() != [batch, out_ch, len] {
            return Err(Error::Shape(format!(
                "conv1d_k1 backward expects grad [{batch} × {out_ch} × {len}], got {:?}",
                grad_out.shape()
            )));
        }
        let mut grad_in = Tensor::zeros(&[batch, in_ch, len]);
        for n in 0..batch {
            for oc in 0..out_ch {
                let gl = grad_out.lane(n, oc);
                self.b.grad.data_mut()[oc] += gl.iter().sum::<f64>();
                for ic in 0..in_ch {
                    let xl = x.lane(n, ic);
                    let dw: f64 = gl.iter().zip(xl).map(|(g, xv)| g * xv).sum();
                    *self.w.grad.get2_mut(oc, ic) += dw;
                    let w = self.w.value.get2(oc, ic);
                    if w != 0.0 {
                        let gi = grad_in.lane_mut(n, ic);
                        for (giv, g) in gi.iter_mut().zip(gl) {
                            *giv += w * g;
                        }
                    }
                }
            }
        }
        grad_in.assert_finite("conv1d_k1 backward")?;
        Ok(grad_in)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

/// Kernel-3 1-d convolution (cross-correlation), stride 1, zero padding 1,
/// so the output length equals the input length. Weights are
/// `[out_ch × in_ch × 3]`; tap k looks at input offset k − 1.
#[derive(Debug, Clone)]
pub struct Conv1dK3 {
    pub w: Param,
    pub b: Param,
}

impl Conv1dK3 {
    pub fn new(name: &str, in_ch: usize, out_ch: usize) -> Conv1dK3 {
        Conv1dK3 {
            w: Param::new(format!("{name}.w"), &[out_ch, in_ch, 3]),
            b: Param::new(format!("{name}.b"), &[out_ch]),
        }
    }

    pub fn in_ch(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn out_ch(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        let fan_in = self.in_ch() * 3;
        kaiming_uniform(rng, fan_in, self.w.value.data_mut());
        self.b.value.data_mut().fill(0.0);
    }

    /// `[batch × in_ch × len] → [batch × out_ch × len]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (out_ch, in_ch) = (self.out_ch(), self.in_ch());
        if x.shape().len() != 3 || x.shape()[1] != in_ch {
            return Err(Error::Shape(format!(
                "conv1d_k3 expects [batch × {in_ch} × len], got {:?}",
                x.shape()
            )));
        }
        let (batch, len) = (x.shape()[0], x.shape()[2]);
        let mut y = Tensor::zeros(&[batch, out_ch, len]);
        for n in 0..batch {
            for oc in 0..out_ch {
                let bias = self.b.value.data()[oc];
                y.lane_mut(n, oc).fill(bias);
                for ic in 0..in_ch {
                    let xl = x.lane(n, ic);
                    let yl = y.lane_mut(n, oc);
                    for k in 0..3usize {
                        let w = self.w.value.get3(oc, ic, k);
                        if w == 0.0 {
                            continue;
                        }
                        // Output index l reads input index l + k − 1; slide
                        // both slices so the pair stays in bounds.
                        let (y_lo, x_lo) = if k == 0 { (1, 0) } else { (0, k - 1) };
                        let span = len - y_lo.max(x_lo);
                        for (yv, xv) in yl[y_lo..y_lo + span].iter_mut().zip(&xl[x_lo..x_lo + span])
                        {
                            *yv += w * xv;
                        }
                    }
                }
            }
        }
        y.assert_finite("conv1d_k3 forward")?;
        Ok(y)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (out_ch, in_ch) = (self.out_ch(), self.in_ch());
        let (batch, len) = (x.shape()[0], x.shape()[2]);
        if grad_out.shape() != [batch, out_ch, len] {
            return Err(Error::Shape(format!(
                "conv1d_k3 backward expects grad [{batch} × {out_ch} × {len}], got {:?}",
                grad_out.shape()
            )));
        }
        let mut grad_in = Tensor::zeros(&[batch, in_ch, len]);
        for n in 0..batch {
            for oc in 0..out_ch {
                let gl = grad_out.lane(n, oc);
                self.b.grad.data_mut()[oc] += gl.iter().sum::<f64>();
                for ic in 0..in_ch {
                    let xl = x.lane(n, ic);
                    for k in 0..3usize {
                        let (y_lo, x_lo) = if k == 0 { (1, 0) } else { (0, k - 1) };
                        let span = len - y_lo.max(x_lo);
                        let dw: f64 = gl[y_lo..y_lo + span]
                            .iter()
                            .zip(&xl[x_lo..x_lo + span])
                            .map(|(g, xv)| g * xv)
                            .sum();
                        *self.w.grad.get3_mut(oc, ic, k) += dw;
                        let w = self.w.value.get3(oc, ic, k);
                        if w != 0.0 {
                            let gi = grad_in.lane_mut(n, ic);
                            for (giv, g) in
                                gi[x_lo..x_lo + span].iter_mut().zip(&gl[y_lo..y_lo + span])
                            {
                                *giv += w * g;
                            }
                        }
                    }
                }
            }
        }
        grad_in.assert_finite("conv1d_k3 backward")?;
        Ok(grad_in)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

// Small typed accessors for 2-d/3-d params; kept on Tensor privately via an
// extension trait so call sites stay readable.
trait Indexing {
    fn get2(&self, i: usize, j: usize) -> f64;
    fn get2_mut(&mut self, i: usize, j: usize) -> &mut f64;
    fn get3(&self, i: usize, j: usize, k: usize) -> f64;
    fn get3_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64;
}

impl Indexing for Tensor {
    fn get2(&self, i: usize, j: usize) -> f64 {
        self.data()[i * self.shape()[1] + j]
    }

    fn get2_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let w = self.shape()[1];
        &mut self.data_mut()[i * w + j]
    }

    fn get3(&self, i: usize, j: usize, k: usize) -> f64 {
        let (d1, d2) = (self.shape()[1], self.shape()[2]);
        self.data()[(i * d1 + j) * d2 + k]
    }

    fn get3_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        let (d1, d2) = (self.shape()[1], self.shape()[2]);
        &mut self.data_mut()[(i * d1 + j) * d2 + k]
    }
}

/// ReLU, elementwise.
pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// ∂ReLU: passes the gradient where the *pre-activation* input was > 0.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    debug_assert_eq!(x.shape(), grad_out.shape());
    let mut g = grad_out.clone();
    for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
        if *xv <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

/// Numerically stable logistic function.
pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid, elementwise.
pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = sigmoid_scalar(*v);
    }
    y
}

/// ∂sigmoid in terms of the *output* y = σ(x): dx = y·(1−y)·dy.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    debug_assert_eq!(y.shape(), grad_out.shape());
    let mut g = grad_out.clone();
    for (gv, yv) in g.data_mut().iter_mut().zip(y.data()) {
        *gv *= yv * (1.0 - yv);
    }
    g
}

/// Index bookkeeping from a pooling forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct PoolCache {
    in_shape: Vec<usize>,
    argmax: Vec<usize>,
}

/// Length-2, stride-2 max pooling over the last axis of
/// `[batch × ch × len]`; an odd trailing element is dropped. Ties resolve
/// to the earlier position.
pub fn max_pool1d_2(x: &Tensor) -> Result<(Tensor, PoolCache)> {
    if x.shape().len() != 3 || x.shape()[2] < 2 {
        return Err(Error::Shape(format!(
            "max_pool1d_2 expects [batch × ch × len≥2], got {:?}",
            x.shape()
        )));
    }
    let (batch, ch, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let out_len = len / 2;
    let mut y = Tensor::zeros(&[batch, ch, out_len]);
    let mut argmax = Vec::with_capacity(batch * ch * out_len);
    for n in 0..batch {
        for c in 0..ch {
            let xl = x.lane(n, c);
            let yl = y.lane_mut(n, c);
            for (o, yv) in yl.iter_mut().enumerate() {
                let i = 2 * o;
                // `>=` keeps the earlier element on ties.
                let pick = if xl[i] >= xl[i + 1] { i } else { i + 1 };
                *yv = xl[pick];
                argmax.push(pick);
            }
        }
    }
    Ok((
        y,
        PoolCache {
            in_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn max_pool1d_2_backward(cache: &PoolCache, grad_out: &Tensor) -> Result<Tensor> {
    let mut grad_in = Tensor::zeros(&cache.in_shape);
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::Shape(format!(
            "pool backward expects {} gradients, got {}",
            cache.argmax.len(),
            grad_out.len()
        )));
    }
    let (ch, len) = (cache.in_shape[1], cache.in_shape[2]);
    let out_len = len / 2;
    for (flat, &g) in grad_out.data().iter().enumerate() {
        let lane = flat / out_len;
        let (n, c) = (lane / ch, lane % ch);
        let pick = cache.argmax[flat];
        grad_in.lane_mut(n, c)[pick] += g;
    }
    Ok(grad_in)
}

/// Global average and max pooling over the length axis, concatenated:
/// `[batch × ch × len] → [batch × 2·ch]` with averages in the first `ch`
/// slots and maxima (first occurrence on ties) in the last `ch`.
pub fn global_avg_max_pool(x: &Tensor) -> Result<(Tensor, PoolCache)> {
    if x.shape().len() != 3 || x.shape()[2] == 0 {
        return Err(Error::Shape(format!(
            "global pool expects [batch × ch × len≥1], got {:?}",
            x.shape()
        )));
    }
    let (batch, ch, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut y = Tensor::zeros(&[batch, 2 * ch]);
    let mut argmax = Vec::with_capacity(batch * ch);
    for n in 0..batch {
        for c in 0..ch {
            let xl = x.lane(n, c);
            let avg = xl.iter().sum::<f64>() / len as f64;
            let mut best = 0;
            for (i, &v) in xl.iter().enumerate() {
                if v > xl[best] {
                    best = i;
                }
            }
            y.row_mut(n)[c] = avg;
            y.row_mut(n)[ch + c] = xl[best];
            argmax.push(best);
        }
    }
    Ok((
        y,
        PoolCache {
            in_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn global_avg_max_pool_backward(cache: &PoolCache, grad_out: &Tensor) -> Result<Tensor> {
    let (batch, ch, len) = (cache.in_shape[0], cache.in_shape[1], cache.in_shape[2]);
    if grad_out.shape() != [batch, 2 * ch] {
        return Err(Error::Shape(format!(
            "global pool backward expects [{batch} × {}], got {:?}",
            2 * ch,
            grad_out.shape()
        )));
    }
    let mut grad_in = Tensor::zeros(&cache.in_shape);
    for n in 0..batch {
        for c in 0..ch {
            let g_avg = grad_out.row(n)[c] / len as f64;
            let g_max = grad_out.row(n)[ch + c];
            let best = cache.argmax[n * ch + c];
            let gi = grad_in.lane_mut(n, c);
            for v in gi.iter_mut() {
                *v += g_avg;
            }
            gi[best] += g_max;
        }
    }
    Ok(grad_in)
}
