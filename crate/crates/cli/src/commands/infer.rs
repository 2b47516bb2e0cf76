//! Single-image upscaling. The network runs on the luma channel; for RGB
//! inputs the chroma planes are upscaled bicubically and the result is
//! converted back, clamped, and quantized to 8-bit.

use std::path::Path;

use srres_core::baselines::{resample, ResampleMode, ResampleSpec};
use srres_core::checkpoint;
use srres_core::color::{rgb_to_ycbcr, ycbcr_to_rgb};
use srres_core::data::{load_image, save_gray_png, save_rgb_png};
use srres_core::tensor::{Shape, Tensor};
use srres_core::Result;

use crate::commands::clamp_unit;

pub fn run(ckpt: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = checkpoint::load(ckpt)?;
    let scale = model.config.scale;
    let img = load_image(input)?;
    let s = img.shape();

    if s.c == 1 {
        let sr = clamp_unit(model.infer(&img)?);
        return save_gray_png(&sr, out);
    }

    let ycc = rgb_to_ycbcr(&img)?;
    let mut y = Tensor::zeros(Shape::new(1, 1, s.h, s.w))?;
    let mut cbcr = Tensor::zeros(Shape::new(1, 2, s.h, s.w))?;
    let plane = s.h * s.w;
    y.data_mut().copy_from_slice(&ycc.data()[..plane]);
    cbcr.data_mut().copy_from_slice(&ycc.data()[plane..]);

    let y_sr = model.infer(&y)?;
    let cbcr_sr = resample(
        &cbcr,
        ResampleSpec {
            mode: ResampleMode::Bicubic,
            scale: scale as f64,
            antialias: false,
        },
    )?;

    let os = y_sr.shape();
    let mut ycc_sr = Tensor::zeros(Shape::new(1, 3, os.h, os.w))?;
    let oplane = os.h * os.w;
    ycc_sr.data_mut()[..oplane].copy_from_slice(y_sr.data());
    ycc_sr.data_mut()[oplane..].copy_from_slice(cbcr_sr.data());

    let rgb = clamp_unit(ycbcr_to_rgb(&ycc_sr)?);
    save_rgb_png(&rgb, out)
}
