//! Rank-4 NCHW tensors.
//!
//! Everything in the pipeline — images, feature maps, gradients — is a
//! `Tensor<E>` with shape `(n, c, h, w)` and contiguous row-major storage.
//! `f32` is the training dtype; `f64` exists solely for finite-difference
//! gradient checking, so every numeric routine is generic over [`Scalar`].
//! Tensors are plain values: operations return new tensors and never mutate
//! their inputs, which makes read-only sharing across threads safe.

use std::fmt;

use crate::error::{Result, SrError};
use crate::rng::Rng;

/// Element type for tensors: `f32` (training) or `f64` (gradient checking).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to scalar")
    }

    fn to_f64c(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `(n, c, h, w)` dimensions of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(SrError::InvalidShape(format!(
                "all dims must be >= 1, got {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

/// Dense rank-4 array in NCHW order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<E: Scalar = f32> {
    shape: Shape,
    data: Vec<E>,
}

impl<E: Scalar> Tensor<E> {
    /// Constant-filled tensor. Errors with `InvalidShape` on any zero dim.
    pub fn new(shape: Shape, fill: E) -> Result<Self> {
        shape.validate()?;
        Ok(Tensor {
            shape,
            data: vec![fill; shape.numel()],
        })
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::new(shape, E::zero())
    }

    /// Takes ownership of `data`, which must have exactly `shape.numel()`
    /// elements in NCHW row-major order.
    pub fn from_vec(shape: Shape, data: Vec<E>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.numel() {
            return Err(SrError::InvalidShape(format!(
                "data length {} does not match shape {} ({} elements)",
                data.len(),
                shape,
                shape.numel()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Normal-filled tensor with standard deviation `std` (mean zero),
    /// elements drawn in NCHW order.
    pub fn randn(shape: Shape, std: f64, rng: &mut Rng) -> Result<Self> {
        shape.validate()?;
        let data = (0..shape.numel())
            .map(|_| E::from_f64c(rng.normal() * std))
            .collect();
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    #[inline]
    pub fn idx(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + h) * self.shape.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> E {
        self.data[self.idx(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: E) {
        let i = self.idx(n, c, h, w);
        self.data[i] = v;
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(SrError::ShapeMismatch(format!(
                "{op}: {} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "mul")?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    pub fn scale(&self, s: E) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(E) -> E) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(E, E) -> E) -> Self {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Converts between element types through `f64`.
    pub fn cast<F: Scalar>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|&v| F::from_f64c(v.to_f64c()))
                .collect(),
        }
    }

    /// Spatial crop applied to every `(n, c)` plane.
    pub fn crop_spatial(&self, top: usize, left: usize, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || top + h > self.shape.h || left + w > self.shape.w {
            return Err(SrError::InvalidShape(format!(
                "crop {h}x{w} at ({top}, {left}) exceeds {}",
                self.shape
            )));
        }
        let out_shape = Shape::new(self.shape.n, self.shape.c, h, w);
        let mut out = Vec::with_capacity(out_shape.numel());
        for n in 0..self.shape.n {
            for c in 0..self.shape.c {
                for i in 0..h {
                    let start = self.idx(n, c, top + i, left);
                    out.extend_from_slice(&self.data[start..start + w]);
                }
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data: out,
        })
    }

    /// Mirror along the width axis.
    pub fn hflip(&self) -> Self {
        let mut out = self.clone();
        let w = self.shape.w;
        for n in 0..self.shape.n {
            for c in 0..self.shape.c {
                for h in 0..self.shape.h {
                    let base = self.idx(n, c, h, 0);
                    out.data[base..base + w].reverse();
                }
            }
        }
        out
    }

    /// Clamps every element into `[0, 1]` and returns how many were outside.
    pub fn clamp01_counting(&mut self) -> u64 {
        let mut clamped = 0u64;
        for v in &mut self.data {
            if *v < E::zero() {
                *v = E::zero();
                clamped += 1;
            } else if *v > E::one() {
                *v = E::one();
                clamped += 1;
            }
        }
        clamped
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Concatenates same-shaped `(1, c, h, w)` tensors along the batch axis.
pub fn stack_batch<E: Scalar>(items: &[Tensor<E>]) -> Result<Tensor<E>> {
    let first = items
        .first()
        .ok_or_else(|| SrError::InvalidShape("stack_batch of zero tensors".into()))?;
    let s = first.shape();
    let mut data = Vec::with_capacity(items.len() * s.numel());
    for t in items {
        if t.shape() != s {
            return Err(SrError::ShapeMismatch(format!(
                "stack_batch: {} vs {}",
                t.shape(),
                s
            )));
        }
        data.extend_from_slice(t.data());
    }
    Tensor::from_vec(Shape::new(items.len() * s.n, s.c, s.h, s.w), data)
}
