//! Neural network layers: stride-1 convolution (via im2col), ReLU, batch
//! normalization, and pixel shuffle.
//!
//! Each layer exposes a forward pass that returns the activation plus a cache
//! of whatever the backward pass needs. Backward passes take the upstream
//! gradient and return the input gradient together with parameter gradients.

use crate::error::{Result, SrError};
use crate::matrix::{col2im, conv_out_dims, im2col, matmul, Matrix};
use crate::rng::Rng;
use crate::tensor::{Scalar, Shape, Tensor};

/// Weights for a square stride-1 convolution with symmetric zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<E: Scalar = f32> {
    /// `(out_c, in_c, k, k)`.
    pub weight: Tensor<E>,
    /// One bias per output channel.
    pub bias: Vec<E>,
    pub pad: usize,
}

/// Saved forward state for [`ConvParams::backward`].
pub struct ConvCache<E: Scalar = f32> {
    cols: Matrix<E>,
    in_shape: Shape,
}

/// Gradients produced by a convolution backward pass.
#[derive(Debug, Clone)]
pub struct ConvGrads<E: Scalar = f32> {
    pub d_weight: Tensor<E>,
    pub d_bias: Vec<E>,
}

impl<E: Scalar> ConvParams<E> {
    /// He-initialized weights: zero-mean normals with `sqrt(2 / fan_in)`
    /// standard deviation, zero biases, same-size padding `k / 2`.
    pub fn init(in_c: usize, out_c: usize, k: usize, rng: &mut Rng) -> Result<Self> {
        let std = (2.0 / (in_c * k * k) as f64).sqrt();
        Ok(ConvParams {
            weight: Tensor::randn(Shape::new(out_c, in_c, k, k), std, rng)?,
            bias: vec![E::zero(); out_c],
            pad: k / 2,
        })
    }

    pub fn from_parts(weight: Tensor<E>, bias: Vec<E>, pad: usize) -> Result<Self> {
        if bias.len() != weight.shape().n {
            return Err(SrError::InvalidShape(format!(
                "bias length {} does not match {} output channels",
                bias.len(),
                weight.shape().n
            )));
        }
        Ok(ConvParams { weight, bias, pad })
    }

    pub fn out_c(&self) -> usize {
        self.weight.shape().n
    }

    pub fn in_c(&self) -> usize {
        self.weight.shape().c
    }

    pub fn k(&self) -> usize {
        self.weight.shape().h
    }

    fn weight_mat(&self) -> Matrix<E> {
        let s = self.weight.shape();
        Matrix {
            rows: s.n,
            cols: s.c * s.h * s.w,
            data: self.weight.data().to_vec(),
        }
    }

    /// `y = W * im2col(x) + b`, reshaped back to `(n, out_c, oh, ow)`.
    pub fn forward(&self, x: &Tensor<E>) -> Result<(Tensor<E>, ConvCache<E>)> {
        let s = x.shape();
        if s.c != self.in_c() {
            return Err(SrError::ShapeMismatch(format!(
                "conv expects {} input channels, got {}",
                self.in_c(),
                s.c
            )));
        }
        let k = self.k();
        let (oh, ow) = conv_out_dims(s.h, s.w, k, k, self.pad)?;
        let cols = im2col(x, k, k, self.pad)?;
        let mut y_mat = matmul(&self.weight_mat(), &cols)?;
        for oc in 0..self.out_c() {
            let b = self.bias[oc];
            for v in &mut y_mat.data[oc * y_mat.cols..(oc + 1) * y_mat.cols] {
                *v += b;
            }
        }
        let y = mat_to_nchw(&y_mat, s.n, oh, ow)?;
        Ok((y, ConvCache { cols, in_shape: s }))
    }

    /// Forward pass without keeping the backward cache.
    pub fn infer(&self, x: &Tensor<E>) -> Result<Tensor<E>> {
        Ok(self.forward(x)?.0)
    }

    /// Returns `(d_x, grads)` for upstream gradient `dy`.
    pub fn backward(
        &self,
        dy: &Tensor<E>,
        cache: &ConvCache<E>,
    ) -> Result<(Tensor<E>, ConvGrads<E>)> {
        let k = self.k();
        let dy_mat = nchw_to_mat(dy);
        let mut d_bias = vec![E::zero(); self.out_c()];
        for oc in 0..self.out_c() {
            d_bias[oc] = dy_mat.data[oc * dy_mat.cols..(oc + 1) * dy_mat.cols]
                .iter()
                .copied()
                .sum();
        }
        let d_w_mat = matmul(&dy_mat, &cache.cols.transpose())?;
        let d_weight = Tensor::from_vec(self.weight.shape(), d_w_mat.data)?;
        let d_cols = matmul(&self.weight_mat().transpose(), &dy_mat)?;
        let d_x = col2im(&d_cols, cache.in_shape, k, k, self.pad)?;
        Ok((d_x, ConvGrads { d_weight, d_bias }))
    }
}

/// `(n, c, oh, ow)` tensor from a `(c, n * oh * ow)` matrix whose column
/// index is `(n * oh + i) * ow + j`.
fn mat_to_nchw<E: Scalar>(m: &Matrix<E>, n: usize, oh: usize, ow: usize) -> Result<Tensor<E>> {
    let c = m.rows;
    let mut out = Tensor::zeros(Shape::new(n, c, oh, ow))?;
    let plane = oh * ow;
    for ci in 0..c {
        let row = &m.data[ci * m.cols..(ci + 1) * m.cols];
        for ni in 0..n {
            let dst = out.idx(ni, ci, 0, 0);
            out.data_mut()[dst..dst + plane].copy_from_slice(&row[ni * plane..(ni + 1) * plane]);
        }
    }
    Ok(out)
}

/// Inverse layout change of [`mat_to_nchw`].
fn nchw_to_mat<E: Scalar>(t: &Tensor<E>) -> Matrix<E> {
    let s = t.shape();
    let mut m = Matrix::zeros(s.c, s.n * s.h * s.w);
    let plane = s.h * s.w;
    for ci in 0..s.c {
        let row = &mut m.data[ci * m.cols..(ci + 1) * m.cols];
        for ni in 0..s.n {
            let src = t.idx(ni, ci, 0, 0);
            row[ni * plane..(ni + 1) * plane].copy_from_slice(&t.data()[src..src + plane]);
        }
    }
    m
}

/// Positive-input mask saved by [`relu_forward`].
pub struct ReluCache {
    mask: Vec<bool>,
}

impl ReluCache {
    /// Sign pattern recorded during the forward pass.
    pub fn pattern(&self) -> &[bool] {
        &self.mask
    }
}

/// `max(x, 0)` elementwise. The mask records `x > 0`; the subgradient at
/// exactly zero is taken as zero.
pub fn relu_forward<E: Scalar>(x: &Tensor<E>) -> (Tensor<E>, ReluCache) {
    let mask = x.data().iter().map(|&v| v > E::zero()).collect();
    let y = x.map(|v| if v > E::zero() { v } else { E::zero() });
    (y, ReluCache { mask })
}

pub fn relu_backward<E: Scalar>(dy: &Tensor<E>, cache: &ReluCache) -> Tensor<E> {
    let mut d = dy.clone();
    for (v, &m) in d.data_mut().iter_mut().zip(&cache.mask) {
        if !m {
            *v = E::zero();
        }
    }
    d
}

/// Per-channel batch normalization state.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<E: Scalar = f32> {
    pub gamma: Vec<E>,
    pub beta: Vec<E>,
    pub running_mean: Vec<E>,
    pub running_var: Vec<E>,
    pub momentum: f64,
    pub eps: f64,
}

/// Saved normalization state for [`BatchNormParams::backward`].
pub struct BnCache<E: Scalar = f32> {
    x_hat: Tensor<E>,
    inv_std: Vec<E>,
}

/// Gradients produced by a batch norm backward pass.
#[derive(Debug, Clone)]
pub struct BnGrads<E: Scalar = f32> {
    pub d_gamma: Vec<E>,
    pub d_beta: Vec<E>,
}

impl<E: Scalar> BatchNormParams<E> {
    /// Unit scale, zero shift, zero running mean, unit running variance.
    pub fn init(c: usize) -> Self {
        BatchNormParams {
            gamma: vec![E::one(); c],
            beta: vec![E::zero(); c],
            running_mean: vec![E::zero(); c],
            running_var: vec![E::one(); c],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check_channels(&self, s: Shape) -> Result<()> {
        if s.c != self.channels() {
            return Err(SrError::ShapeMismatch(format!(
                "batch norm over {} channels got input {s}",
                self.channels()
            )));
        }
        Ok(())
    }

    /// Training mode: normalizes with per-channel batch statistics over the
    /// `(n, h, w)` axes using the biased variance, then updates the running
    /// estimates as `running = (1 - momentum) * running + momentum * batch`.
    pub fn forward_train(&mut self, x: &Tensor<E>) -> Result<(Tensor<E>, BnCache<E>)> {
        let s = x.shape();
        self.check_channels(s)?;
        let m = (s.n * s.h * s.w) as f64;
        let mut y = Tensor::zeros(s)?;
        let mut x_hat = Tensor::zeros(s)?;
        let mut inv_std = vec![E::zero(); s.c];
        for c in 0..s.c {
            let mut sum = E::zero();
            for n in 0..s.n {
                let base = x.idx(n, c, 0, 0);
                sum += x.data()[base..base + s.h * s.w].iter().copied().sum::<E>();
            }
            let mean = sum / E::from_f64c(m);
            let mut var_sum = E::zero();
            for n in 0..s.n {
                let base = x.idx(n, c, 0, 0);
                for &v in &x.data()[base..base + s.h * s.w] {
                    let d = v - mean;
                    var_sum += d * d;
                }
            }
            let var = var_sum / E::from_f64c(m);
            let istd = (var + E::from_f64c(self.eps)).sqrt().recip();
            inv_std[c] = istd;
            let (g, b) = (self.gamma[c], self.beta[c]);
            for n in 0..s.n {
                let base = x.idx(n, c, 0, 0);
                for i in 0..s.h * s.w {
                    let xh = (x.data()[base + i] - mean) * istd;
                    x_hat.data_mut()[base + i] = xh;
                    y.data_mut()[base + i] = g * xh + b;
                }
            }
            let mom = E::from_f64c(self.momentum);
            self.running_mean[c] = (E::one() - mom) * self.running_mean[c] + mom * mean;
            self.running_var[c] = (E::one() - mom) * self.running_var[c] + mom * var;
        }
        Ok((y, BnCache { x_hat, inv_std }))
    }

    /// Inference mode: normalizes with the running estimates.
    pub fn forward_eval(&self, x: &Tensor<E>) -> Result<Tensor<E>> {
        let s = x.shape();
        self.check_channels(s)?;
        let mut y = Tensor::zeros(s)?;
        for c in 0..s.c {
            let istd = (self.running_var[c] + E::from_f64c(self.eps))
                .sqrt()
                .recip();
            let (mean, g, b) = (self.running_mean[c], self.gamma[c], self.beta[c]);
            for n in 0..s.n {
                let base = x.idx(n, c, 0, 0);
                for i in 0..s.h * s.w {
                    y.data_mut()[base + i] = g * (x.data()[base + i] - mean) * istd + b;
                }
            }
        }
        Ok(y)
    }

    /// Returns `(d_x, grads)` using the standard batch-statistics chain rule:
    /// `d_x = (gamma * inv_std / M) * (M * dy - sum(dy) - x_hat * sum(dy * x_hat))`.
    pub fn backward(&self, dy: &Tensor<E>, cache: &BnCache<E>) -> Result<(Tensor<E>, BnGrads<E>)> {
        let s = dy.shape();
        self.check_channels(s)?;
        let m = E::from_f64c((s.n * s.h * s.w) as f64);
        let mut d_x = Tensor::zeros(s)?;
        let mut d_gamma = vec![E::zero(); s.c];
        let mut d_beta = vec![E::zero(); s.c];
        for c in 0..s.c {
            let mut sum_dy = E::zero();
            let mut sum_dy_xh = E::zero();
            for n in 0..s.n {
                let base = dy.idx(n, c, 0, 0);
                for i in 0..s.h * s.w {
                    let g = dy.data()[base + i];
                    sum_dy += g;
                    sum_dy_xh += g * cache.x_hat.data()[base + i];
                }
            }
            d_beta[c] = sum_dy;
            d_gamma[c] = sum_dy_xh;
            let k = self.gamma[c] * cache.inv_std[c] / m;
            for n in 0..s.n {
                let base = dy.idx(n, c, 0, 0);
                for i in 0..s.h * s.w {
                    let g = dy.data()[base + i];
                    let xh = cache.x_hat.data()[base + i];
                    d_x.data_mut()[base + i] = k * (m * g - sum_dy - xh * sum_dy_xh);
                }
            }
        }
        Ok((d_x, BnGrads { d_gamma, d_beta }))
    }
}

/// Rearranges `(n, c * r^2, h, w)` into `(n, c, h * r, w * r)`:
/// `out[n][c][h * r + i][w * r + j] = x[n][c * r^2 + i * r + j][h][w]`.
pub fn pixel_shuffle<E: Scalar>(x: &Tensor<E>, r: usize) -> Result<Tensor<E>> {
    let s = x.shape();
    if r == 0 || s.c % (r * r) != 0 {
        return Err(SrError::InvalidShape(format!(
            "pixel_shuffle by {r} needs channels divisible by {}, got {}",
            r * r,
            s.c
        )));
    }
    let oc = s.c / (r * r);
    let mut out = Tensor::zeros(Shape::new(s.n, oc, s.h * r, s.w * r))?;
    for n in 0..s.n {
        for c in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let src_c = c * r * r + i * r + j;
                    for h in 0..s.h {
                        for w in 0..s.w {
                            let v = x.at(n, src_c, h, w);
                            out.set(n, c, h * r + i, w * r + j, v);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`pixel_shuffle`]; doubles as its backward pass since the
/// rearrangement is a permutation.
pub fn pixel_unshuffle<E: Scalar>(x: &Tensor<E>, r: usize) -> Result<Tensor<E>> {
    let s = x.shape();
    if r == 0 || s.h % r != 0 || s.w % r != 0 {
        return Err(SrError::InvalidShape(format!(
            "pixel_unshuffle by {r} needs spatial dims divisible by {r}, got {s}"
        )));
    }
    let (oh, ow) = (s.h / r, s.w / r);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c * r * r, oh, ow))?;
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..r {
                for j in 0..r {
                    let dst_c = c * r * r + i * r + j;
                    for h in 0..oh {
                        for w in 0..ow {
                            let v = x.at(n, c, h * r + i, w * r + j);
                            out.set(n, dst_c, h, w, v);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_1x1_is_affine() {
        let w = Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![2.0f32]).unwrap();
        let conv = ConvParams::from_parts(w, vec![0.5], 0).unwrap();
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![1.0f32, -1.0, 3.0]).unwrap();
        let y = conv.infer(&x).unwrap();
        assert_eq!(y.data(), &[2.5, -1.5, 6.5]);
    }

    #[test]
    fn conv_3x3_ones_sums_window() {
        // All-ones 3x3 kernel with pad 1 over a 2x2 input: every padded
        // window covers the whole input, so each output equals the total sum.
        let w = Tensor::new(Shape::new(1, 1, 3, 3), 1.0f32).unwrap();
        let conv = ConvParams::from_parts(w, vec![0.0], 1).unwrap();
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let y = conv.infer(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(y.data(), &[10.0, 10.0, 10.0, 10.0]);
    }

    #[test]
    fn conv_backward_shapes_and_bias_grad() {
        let mut rng = Rng::seeded(7);
        let conv = ConvParams::<f32>::init(2, 3, 3, &mut rng).unwrap();
        let x = Tensor::randn(Shape::new(2, 2, 4, 4), 1.0, &mut rng).unwrap();
        let (y, cache) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(2, 3, 4, 4));
        let dy = Tensor::new(y.shape(), 1.0f32).unwrap();
        let (dx, grads) = conv.backward(&dy, &cache).unwrap();
        assert_eq!(dx.shape(), x.shape());
        assert_eq!(grads.d_weight.shape(), conv.weight.shape());
        // With dy of all ones, each bias gradient is the output plane count.
        assert_eq!(grads.d_bias, vec![32.0, 32.0, 32.0]);
    }

    #[test]
    fn he_init_statistics() {
        let mut rng = Rng::seeded(11);
        let conv = ConvParams::<f32>::init(16, 64, 3, &mut rng).unwrap();
        assert!(conv.bias.iter().all(|&b| b == 0.0));
        let n = conv.weight.numel() as f64;
        let mean: f64 = conv.weight.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var: f64 = conv
            .weight
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let expect = 2.0 / (16.0 * 9.0);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!(
            (var - expect).abs() < 0.15 * expect,
            "var {var} vs {expect}"
        );
    }

    #[test]
    fn relu_masks_negatives() {
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![-1.0f32, 0.0, 2.0]).unwrap();
        let (y, cache) = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let dy = Tensor::new(x.shape(), 5.0f32).unwrap();
        let dx = relu_backward(&dy, &cache);
        assert_eq!(dx.data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn bn_normalizes_batch() {
        let mut bn = BatchNormParams::<f64>::init(1);
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = bn.forward_train(&x).unwrap();
        let mean: f64 = y.data().iter().sum::<f64>() / 4.0;
        let var: f64 = y.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "var {var}");
        // Batch mean 2.5 and biased variance 1.25 fold into the running
        // stats with momentum 0.1.
        assert!((bn.running_mean[0] - 0.25).abs() < 1e-12);
        assert!((bn.running_var[0] - 1.025).abs() < 1e-12);
    }

    #[test]
    fn bn_eval_uses_running_stats() {
        let mut bn = BatchNormParams::<f64>::init(1);
        bn.running_mean[0] = 1.0;
        bn.running_var[0] = 4.0;
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 2), vec![1.0, 3.0]).unwrap();
        let y = bn.forward_eval(&x).unwrap();
        assert!((y.data()[0]).abs() < 1e-6);
        assert!((y.data()[1] - 2.0 / (4.0 + 1e-5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bn_backward_grad_sums() {
        let mut bn = BatchNormParams::<f64>::init(1);
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (_, cache) = bn.forward_train(&x).unwrap();
        let dy = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (dx, grads) = bn.backward(&dy, &cache).unwrap();
        assert!((grads.d_beta[0] - 1.0).abs() < 1e-12);
        // d_x for a normalization layer sums to ~0 across the batch.
        let s: f64 = dx.data().iter().sum();
        assert!(s.abs() < 1e-12, "sum {s}");
    }

    #[test]
    fn shuffle_interleaves_channels() {
        let x = Tensor::from_vec(Shape::new(1, 4, 1, 1), vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn shuffle_unshuffle_round_trip() {
        let mut rng = Rng::seeded(3);
        let x = Tensor::<f32>::randn(Shape::new(2, 8, 3, 5), 1.0, &mut rng).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(2, 2, 6, 10));
        assert_eq!(pixel_unshuffle(&y, 2).unwrap(), x);
        // r = 1 is the identity.
        assert_eq!(pixel_shuffle(&x, 1).unwrap(), x);
    }

    #[test]
    fn shuffle_rejects_bad_channels() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 3, 2, 2)).unwrap();
        assert!(matches!(
            pixel_shuffle(&x, 2),
            Err(SrError::InvalidShape(_))
        ));
    }
}
