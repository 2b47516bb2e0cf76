//! Color conversions on `[0, 1]` data: BT.601 luma, full-range YCbCr, and
//! 8-bit quantization.
//!
//! The model trains and runs on the luma channel only. For color inputs the
//! chroma planes bypass the network: convert to YCbCr, super-resolve Y, and
//! recombine with interpolated Cb/Cr.

use crate::error::{Result, SrError};
use crate::tensor::{Shape, Tensor};

fn check_channels(t: &Tensor<f32>, c: usize, what: &str) -> Result<()> {
    if t.shape().c != c {
        return Err(SrError::ShapeMismatch(format!(
            "{what} expects {c} channels, got {}",
            t.shape()
        )));
    }
    Ok(())
}

/// BT.601 luma: `0.299 R + 0.587 G + 0.114 B`.
pub fn rgb_to_y(rgb: &Tensor<f32>) -> Result<Tensor<f32>> {
    check_channels(rgb, 3, "rgb_to_y")?;
    let s = rgb.shape();
    let mut y = Tensor::zeros(Shape::new(s.n, 1, s.h, s.w))?;
    for n in 0..s.n {
        for h in 0..s.h {
            for w in 0..s.w {
                let (r, g, b) = (
                    rgb.at(n, 0, h, w) as f64,
                    rgb.at(n, 1, h, w) as f64,
                    rgb.at(n, 2, h, w) as f64,
                );
                y.set(n, 0, h, w, (0.299 * r + 0.587 * g + 0.114 * b) as f32);
            }
        }
    }
    Ok(y)
}

/// Full-range YCbCr with chroma offset 0.5. Channel 0 equals [`rgb_to_y`].
pub fn rgb_to_ycbcr(rgb: &Tensor<f32>) -> Result<Tensor<f32>> {
    check_channels(rgb, 3, "rgb_to_ycbcr")?;
    let s = rgb.shape();
    let mut out = Tensor::zeros(s)?;
    for n in 0..s.n {
        for h in 0..s.h {
            for w in 0..s.w {
                let (r, g, b) = (
                    rgb.at(n, 0, h, w) as f64,
                    rgb.at(n, 1, h, w) as f64,
                    rgb.at(n, 2, h, w) as f64,
                );
                let y = 0.299 * r + 0.587 * g + 0.114 * b;
                let cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 0.5;
                let cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 0.5;
                out.set(n, 0, h, w, y as f32);
                out.set(n, 1, h, w, cb as f32);
                out.set(n, 2, h, w, cr as f32);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`rgb_to_ycbcr`]. Output may fall slightly outside `[0, 1]`
/// and is left unclamped.
pub fn ycbcr_to_rgb(ycc: &Tensor<f32>) -> Result<Tensor<f32>> {
    check_channels(ycc, 3, "ycbcr_to_rgb")?;
    let s = ycc.shape();
    let mut out = Tensor::zeros(s)?;
    for n in 0..s.n {
        for h in 0..s.h {
            for w in 0..s.w {
                let y = ycc.at(n, 0, h, w) as f64;
                let cb = ycc.at(n, 1, h, w) as f64 - 0.5;
                let cr = ycc.at(n, 2, h, w) as f64 - 0.5;
                out.set(n, 0, h, w, (y + 1.402 * cr) as f32);
                out.set(n, 1, h, w, (y - 0.344136 * cb - 0.714136 * cr) as f32);
                out.set(n, 2, h, w, (y + 1.772 * cb) as f32);
            }
        }
    }
    Ok(out)
}

/// Clamp to `[0, 1]`, then round half up to an 8-bit level.
pub fn quantize_u8(v: f32) -> u8 {
    let c = v.clamp(0.0, 1.0);
    (c * 255.0 + 0.5).floor() as u8
}

/// 8-bit level to `[0, 1]`.
pub fn dequantize_u8(v: u8) -> f32 {
    v as f32 / 255.0
}
