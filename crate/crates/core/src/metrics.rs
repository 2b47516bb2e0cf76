//! Image quality metrics: peak signal-to-noise ratio and structural
//! similarity, both computed in `f64` over `[0, 1]` data.

use crate::error::{Result, SrError};
use crate::tensor::{Scalar, Tensor};

/// `10 * log10(peak^2 / MSE)` with a peak of 1.0. Identical inputs have zero
/// error and return `f64::INFINITY`.
pub fn psnr<E: Scalar>(a: &Tensor<E>, b: &Tensor<E>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(SrError::ShapeMismatch(format!(
            "psnr: {} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    let mut sum = 0.0f64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x.to_f64c() - y.to_f64c();
        sum += d * d;
    }
    let mse = sum / a.numel() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Structural similarity settings. The defaults are the conventional ones:
/// an 11x11 Gaussian window with sigma 1.5, stabilizers `(k1 * L)^2` and
/// `(k2 * L)^2` with `k1 = 0.01`, `k2 = 0.03`, and dynamic range `L = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

fn gaussian_window(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let mut g: Vec<f64> = (0..n)
        .map(|i| (-((i as f64 - c) * (i as f64 - c)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = g.iter().sum();
    for v in &mut g {
        *v /= sum;
    }
    g
}

/// Valid-mode separable filter: horizontal then vertical, output
/// `(h - n + 1) x (w - n + 1)`.
fn filter_valid(img: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut mid = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (u, &gv) in g.iter().enumerate() {
                acc += gv * img[y * w + x + u];
            }
            mid[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (u, &gv) in g.iter().enumerate() {
                acc += gv * mid[(y + u) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Mean structural similarity over all valid window positions of every
/// `(n, c)` plane. Inputs must match in shape and be at least the window
/// size in both spatial dims.
pub fn ssim<E: Scalar>(a: &Tensor<E>, b: &Tensor<E>, p: &SsimParams) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(SrError::ShapeMismatch(format!(
            "ssim: {} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    let s = a.shape();
    if p.window < 2 || p.sigma <= 0.0 {
        return Err(SrError::InvalidConfig(format!(
            "ssim window {} sigma {} out of range",
            p.window, p.sigma
        )));
    }
    if s.h < p.window || s.w < p.window {
        return Err(SrError::InvalidShape(format!(
            "ssim needs at least {0}x{0} pixels, got {1}x{2}",
            p.window, s.h, s.w
        )));
    }
    let g = gaussian_window(p.window, p.sigma);
    let c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    let c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    let plane = s.h * s.w;
    let mut total = 0.0f64;
    let mut count = 0usize;
    for pl in 0..s.n * s.c {
        let pa: Vec<f64> = a.data()[pl * plane..(pl + 1) * plane]
            .iter()
            .map(|&v| v.to_f64c())
            .collect();
        let pb: Vec<f64> = b.data()[pl * plane..(pl + 1) * plane]
            .iter()
            .map(|&v| v.to_f64c())
            .collect();
        let sq_a: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let sq_b: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mu_a = filter_valid(&pa, s.h, s.w, &g);
        let mu_b = filter_valid(&pb, s.h, s.w, &g);
        let m_aa = filter_valid(&sq_a, s.h, s.w, &g);
        let m_bb = filter_valid(&sq_b, s.h, s.w, &g);
        let m_ab = filter_valid(&ab, s.h, s.w, &g);
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = m_aa[i] - ma * ma;
            let vb = m_bb[i] - mb * mb;
            let cov = m_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
        }
        count += mu_a.len();
    }
    Ok(total / count as f64)
}

/// Quality of one super-resolved image against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub psnr_db: f64,
    pub ssim: f64,
}

/// PSNR and SSIM after trimming `border` pixels from every side of both
/// images, which excludes boundary effects that differ between methods.
pub fn evaluate_pair<E: Scalar>(
    sr: &Tensor<E>,
    hr: &Tensor<E>,
    border: usize,
) -> Result<PairMetrics> {
    if sr.shape() != hr.shape() {
        return Err(SrError::ShapeMismatch(format!(
            "evaluate_pair: {} vs {}",
            sr.shape(),
            hr.shape()
        )));
    }
    let s = sr.shape();
    if s.h <= 2 * border || s.w <= 2 * border {
        return Err(SrError::InvalidShape(format!(
            "border {border} leaves nothing of {}x{}",
            s.h, s.w
        )));
    }
    let (sr, hr) = if border > 0 {
        (
            sr.crop_spatial(border, border, s.h - 2 * border, s.w - 2 * border)?,
            hr.crop_spatial(border, border, s.h - 2 * border, s.w - 2 * border)?,
        )
    } else {
        (sr.clone(), hr.clone())
    };
    Ok(PairMetrics {
        psnr_db: psnr(&sr, &hr)?,
        ssim: ssim(&sr, &hr, &SsimParams::default())?,
    })
}

/// One scored image in a comparison run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: String,
    pub image: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Collected scores for several methods over a common image set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn push(&mut self, method: &str, image: &str, m: PairMetrics) {
        self.rows.push(MetricRow {
            method: method.to_string(),
            image: image.to_string(),
            psnr_db: m.psnr_db,
            ssim: m.ssim,
        });
    }

    /// Method names in first-appearance order.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    /// Mean PSNR and SSIM over all rows of one method, or `None` if the
    /// method never appears. An infinite PSNR makes the mean infinite.
    pub fn mean_for(&self, method: &str) -> Option<PairMetrics> {
        let rows: Vec<&MetricRow> = self.rows.iter().filter(|r| r.method == method).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some(PairMetrics {
            psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / n,
            ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        })
    }
}
