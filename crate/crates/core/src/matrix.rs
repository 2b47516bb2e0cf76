//! Dense matrices and the im2col lowering that turns convolution into matmul.
//!
//! The inner product form `c += a[i][p] * b[p][j]` with `p` in the middle loop
//! lets the compiler vectorize the innermost `j` sweep; a dot-product loop
//! order does not vectorize under strict float semantics. Accumulation order
//! is therefore fixed and identical on every run, which the determinism
//! guarantees rely on.

use crate::error::{Result, SrError};
use crate::tensor::{Scalar, Shape, Tensor};

/// Row-major 2-D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<E: Scalar = f32> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<E>,
}

impl<E: Scalar> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![E::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SrError::InvalidShape(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> E {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }
}

/// `a (m x k) * b (k x n)`, accumulating row by row in ikj order.
pub fn matmul<E: Scalar>(a: &Matrix<E>, b: &Matrix<E>) -> Result<Matrix<E>> {
    if a.cols != b.rows {
        return Err(SrError::ShapeMismatch(format!(
            "matmul: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    let n = b.cols;
    for i in 0..a.rows {
        let orow = &mut out.data[i * n..(i + 1) * n];
        for p in 0..a.cols {
            let av = a.data[i * a.cols + p];
            let brow = &b.data[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    Ok(out)
}

/// Output height/width of a stride-1 convolution with symmetric zero padding.
pub fn conv_out_dims(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: usize,
) -> Result<(usize, usize)> {
    let oh = (h + 2 * pad).checked_sub(kh - 1);
    let ow = (w + 2 * pad).checked_sub(kw - 1);
    match (oh, ow) {
        (Some(oh), Some(ow)) if oh >= 1 && ow >= 1 => Ok((oh, ow)),
        _ => Err(SrError::InvalidShape(format!(
            "kernel {kh}x{kw} with pad {pad} does not fit input {h}x{w}"
        ))),
    }
}

/// Unrolls padded `kh x kw` windows of `x` into a matrix with
/// `c * kh * kw` rows and `n * oh * ow` columns. Row index is
/// `(c * kh + u) * kw + v`, column index `(n * oh + i) * ow + j`; positions
/// that fall outside the input read as zero.
pub fn im2col<E: Scalar>(x: &Tensor<E>, kh: usize, kw: usize, pad: usize) -> Result<Matrix<E>> {
    let s = x.shape();
    let (oh, ow) = conv_out_dims(s.h, s.w, kh, kw, pad)?;
    let mut out = Matrix::zeros(s.c * kh * kw, s.n * oh * ow);
    let ncols = out.cols;
    for c in 0..s.c {
        for u in 0..kh {
            for v in 0..kw {
                let row = (c * kh + u) * kw + v;
                let orow = &mut out.data[row * ncols..(row + 1) * ncols];
                for n in 0..s.n {
                    for i in 0..oh {
                        // Input row for this window offset; None while inside padding.
                        let iy = (i + u).checked_sub(pad);
                        for j in 0..ow {
                            let ix = (j + v).checked_sub(pad);
                            let col = (n * oh + i) * ow + j;
                            orow[col] = match (iy, ix) {
                                (Some(y), Some(xp)) if y < s.h && xp < s.w => x.at(n, c, y, xp),
                                _ => E::zero(),
                            };
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`im2col`]: scatter-adds every matrix entry back to the input
/// position it was read from, dropping entries that came from padding.
pub fn col2im<E: Scalar>(
    cols: &Matrix<E>,
    shape: Shape,
    kh: usize,
    kw: usize,
    pad: usize,
) -> Result<Tensor<E>> {
    let (oh, ow) = conv_out_dims(shape.h, shape.w, kh, kw, pad)?;
    if cols.rows != shape.c * kh * kw || cols.cols != shape.n * oh * ow {
        return Err(SrError::ShapeMismatch(format!(
            "col2im: matrix {}x{} does not match shape {shape} with kernel {kh}x{kw}",
            cols.rows, cols.cols
        )));
    }
    let mut out = Tensor::zeros(shape)?;
    for c in 0..shape.c {
        for u in 0..kh {
            for v in 0..kw {
                let row = (c * kh + u) * kw + v;
                let crow = &cols.data[row * cols.cols..(row + 1) * cols.cols];
                for n in 0..shape.n {
                    for i in 0..oh {
                        let iy = match (i + u).checked_sub(pad) {
                            Some(y) if y < shape.h => y,
                            _ => continue,
                        };
                        for j in 0..ow {
                            let ix = match (j + v).checked_sub(pad) {
                                Some(xp) if xp < shape.w => xp,
                                _ => continue,
                            };
                            let idx = out.idx(n, c, iy, ix);
                            out.data_mut()[idx] += crow[(n * oh + i) * ow + j];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
