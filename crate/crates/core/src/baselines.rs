//! Classical interpolation: nearest, bilinear, and Keys bicubic resampling,
//! plus the bicubic degradation operator that manufactures low-resolution
//! inputs from ground-truth images.
//!
//! Coordinates use half-pixel centers: destination pixel `d` samples source
//! position `(d + 0.5) / scale - 0.5`, and out-of-range taps clamp to the
//! edge. Resampling is separable (width pass, then height pass) with all
//! intermediate arithmetic in `f64`. Outputs are written in the
//! anchor-plus-deviation form `x[a] + sum(w_i * (x_i - x[a]))`, which makes
//! constant inputs survive bit-exactly and makes bicubic at scale 1 the
//! identity. Values are never clamped here; bicubic overshoot is preserved
//! for callers to handle.

use crate::error::{Result, SrError};
use crate::tensor::{Scalar, Shape, Tensor};

/// Interpolation kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Nearest,
    Bilinear,
    Bicubic,
}

impl ResampleMode {
    pub fn name(self) -> &'static str {
        match self {
            ResampleMode::Nearest => "nearest",
            ResampleMode::Bilinear => "bilinear",
            ResampleMode::Bicubic => "bicubic",
        }
    }
}

impl std::str::FromStr for ResampleMode {
    type Err = SrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(ResampleMode::Nearest),
            "bilinear" => Ok(ResampleMode::Bilinear),
            "bicubic" => Ok(ResampleMode::Bicubic),
            other => Err(SrError::UnknownMethod(other.to_string())),
        }
    }
}

/// A resampling request: kernel, scale factor, and whether to widen the
/// kernel when downscaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleSpec {
    pub mode: ResampleMode,
    /// Output size is `round(len * scale)` per axis.
    pub scale: f64,
    /// When true and `scale < 1`, the kernel is stretched by `1 / scale` so
    /// its footprint covers the source pixels that map to one output pixel.
    pub antialias: bool,
}

/// Free parameter of the Keys cubic kernel.
pub const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`. Support is `|t| < 2`;
/// `k(0) = 1` and `k(n) = 0` at every other integer.
pub fn bicubic_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        ((KEYS_A + 2.0) * t - (KEYS_A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        (((t - 5.0) * t + 8.0) * t - 4.0) * KEYS_A
    } else {
        0.0
    }
}

/// Triangle kernel with support `|t| < 1`.
pub fn bilinear_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        1.0 - t
    } else {
        0.0
    }
}

/// Source taps for one output position along one axis.
struct AxisTap {
    /// Edge-clamped source index whose value is copied through exactly when
    /// every deviation term vanishes. Nearest mode uses only this.
    anchor: usize,
    /// `(clamped source index, normalized weight)` pairs.
    taps: Vec<(usize, f64)>,
}

fn clamp_idx(i: i64, len: usize) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

fn axis_taps(len: usize, out_len: usize, spec: ResampleSpec) -> Vec<AxisTap> {
    let mut plan = Vec::with_capacity(out_len);
    for d in 0..out_len {
        if spec.mode == ResampleMode::Nearest {
            let i = ((d as f64 + 0.5) / spec.scale).floor() as i64;
            plan.push(AxisTap {
                anchor: clamp_idx(i, len),
                taps: Vec::new(),
            });
            continue;
        }
        let src = (d as f64 + 0.5) / spec.scale - 0.5;
        let (kernel, radius): (fn(f64) -> f64, f64) = match spec.mode {
            ResampleMode::Bilinear => (bilinear_kernel, 1.0),
            _ => (bicubic_kernel, 2.0),
        };
        let kscale = if spec.antialias && spec.scale < 1.0 {
            spec.scale
        } else {
            1.0
        };
        let reach = radius / kscale;
        let lo = (src - reach).floor() as i64;
        let hi = (src + reach).ceil() as i64;
        let mut taps = Vec::new();
        let mut sum = 0.0;
        for i in lo..=hi {
            let w = kernel((i as f64 - src) * kscale);
            if w != 0.0 {
                taps.push((clamp_idx(i, len), w));
                sum += w;
            }
        }
        for (_, w) in &mut taps {
            *w /= sum;
        }
        plan.push(AxisTap {
            anchor: clamp_idx(src.round() as i64, len),
            taps,
        });
    }
    plan
}

/// Applies one axis plan to a strided line of `E` values.
fn apply_taps<E: Scalar>(plan: &[AxisTap], get: impl Fn(usize) -> E, out: &mut [E]) {
    for (d, t) in plan.iter().enumerate() {
        let a = get(t.anchor);
        if t.taps.is_empty() {
            out[d] = a;
            continue;
        }
        let af = a.to_f64c();
        let mut acc = 0.0;
        for &(i, w) in &t.taps {
            acc += w * (get(i).to_f64c() - af);
        }
        out[d] = E::from_f64c(af + acc);
    }
}

/// Separable resampling of every `(n, c)` plane.
pub fn resample<E: Scalar>(x: &Tensor<E>, spec: ResampleSpec) -> Result<Tensor<E>> {
    if !spec.scale.is_finite() || spec.scale <= 0.0 {
        return Err(SrError::InvalidConfig(format!(
            "resample scale must be a positive finite number, got {}",
            spec.scale
        )));
    }
    let s = x.shape();
    let oh = (s.h as f64 * spec.scale).round() as usize;
    let ow = (s.w as f64 * spec.scale).round() as usize;
    if oh == 0 || ow == 0 {
        return Err(SrError::InvalidShape(format!(
            "scale {} collapses {}x{} to {oh}x{ow}",
            spec.scale, s.h, s.w
        )));
    }
    let w_plan = axis_taps(s.w, ow, spec);
    let h_plan = axis_taps(s.h, oh, spec);

    let mut mid = Tensor::zeros(Shape::new(s.n, s.c, s.h, ow))?;
    for n in 0..s.n {
        for c in 0..s.c {
            for h in 0..s.h {
                let base = x.idx(n, c, h, 0);
                let row = &x.data()[base..base + s.w];
                let dst = mid.idx(n, c, h, 0);
                apply_taps(&w_plan, |i| row[i], &mut mid.data_mut()[dst..dst + ow]);
            }
        }
    }

    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow))?;
    let mut col = vec![E::zero(); oh];
    for n in 0..s.n {
        for c in 0..s.c {
            for w in 0..ow {
                let base = mid.idx(n, c, 0, w);
                apply_taps(&h_plan, |i| mid.data()[base + i * ow], &mut col);
                for h in 0..oh {
                    let idx = out.idx(n, c, h, w);
                    out.data_mut()[idx] = col[h];
                }
            }
        }
    }
    Ok(out)
}

/// Drops trailing rows and columns so both spatial dims are multiples of `r`.
pub fn crop_to_multiple<E: Scalar>(x: &Tensor<E>, r: usize) -> Result<Tensor<E>> {
    if r == 0 {
        return Err(SrError::InvalidConfig("crop multiple must be >= 1".into()));
    }
    let s = x.shape();
    let (h, w) = (s.h - s.h % r, s.w - s.w % r);
    if h == 0 || w == 0 {
        return Err(SrError::InvalidShape(format!(
            "{}x{} too small to crop to a multiple of {r}",
            s.h, s.w
        )));
    }
    if (h, w) == (s.h, s.w) {
        return Ok(x.clone());
    }
    x.crop_spatial(0, 0, h, w)
}

/// Reference degradation: crop to a multiple of `r`, then antialiased bicubic
/// downscale by `1 / r`. Output values are not clamped.
pub fn degrade<E: Scalar>(x: &Tensor<E>, r: usize) -> Result<Tensor<E>> {
    if r == 0 {
        return Err(SrError::InvalidConfig("degrade factor must be >= 1".into()));
    }
    let cropped = crop_to_multiple(x, r)?;
    resample(
        &cropped,
        ResampleSpec {
            mode: ResampleMode::Bicubic,
            scale: 1.0 / r as f64,
            antialias: true,
        },
    )
}

/// Plain bicubic upscale by an integer factor (the model's residual path and
/// the strongest interpolation baseline).
pub fn bicubic_upscale<E: Scalar>(x: &Tensor<E>, r: usize) -> Result<Tensor<E>> {
    if r == 0 {
        return Err(SrError::InvalidConfig("upscale factor must be >= 1".into()));
    }
    resample(
        x,
        ResampleSpec {
            mode: ResampleMode::Bicubic,
            scale: r as f64,
            antialias: false,
        },
    )
}
