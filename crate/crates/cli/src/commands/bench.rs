//! Baseline-versus-model comparison over a directory of ground-truth
//! images: degrade each one, upscale with every requested method, score
//! PSNR and SSIM against the original.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use srres_core::baselines::{crop_to_multiple, degrade, resample, ResampleMode, ResampleSpec};
use srres_core::checkpoint;
use srres_core::data::load_image;
use srres_core::metrics::{evaluate_pair, MetricReport, PairMetrics};
use srres_core::model::SrModel;
use srres_core::tensor::Tensor;
use srres_core::{Result, SrError};

use crate::commands::{clamp_unit, init_thread_pool, sorted_pngs, to_luma};
use crate::report::write_metric_csv;

/// One way of producing an SR image from an LR input.
pub enum Method {
    Resample(ResampleMode),
    Model(Box<SrModel<f32>>),
}

/// Parses the comma-separated `--methods` list. Baselines are named
/// `nearest`, `bilinear`, `bicubic`; a trained network is `model:<path>`.
/// The original token becomes the method column in the report.
pub fn parse_methods(spec: &str, scale: usize) -> Result<Vec<(String, Method)>> {
    let mut out = Vec::new();
    for token in spec.split(',').map(str::trim) {
        if token.is_empty() {
            continue;
        }
        if let Some(path) = token.strip_prefix("model:") {
            let model = checkpoint::load(Path::new(path))?;
            if model.config.scale != scale {
                return Err(SrError::InvalidConfig(format!(
                    "checkpoint {path} was trained for scale {}, requested scale {scale}",
                    model.config.scale
                )));
            }
            out.push((token.to_string(), Method::Model(Box::new(model))));
        } else {
            let mode: ResampleMode = token.parse()?;
            out.push((token.to_string(), Method::Resample(mode)));
        }
    }
    if out.is_empty() {
        return Err(SrError::InvalidConfig(
            "at least one method is required".into(),
        ));
    }
    Ok(out)
}

fn upscale(method: &Method, lr: &Tensor<f32>, scale: usize) -> Result<Tensor<f32>> {
    let sr = match method {
        Method::Resample(mode) => resample(
            lr,
            ResampleSpec {
                mode: *mode,
                scale: scale as f64,
                antialias: false,
            },
        )?,
        Method::Model(model) => model.infer(lr)?,
    };
    Ok(clamp_unit(sr))
}

/// Scores every (method, image) pair. Images are processed in parallel but
/// reported in sorted-filename order with methods in the given order, so
/// the table is identical no matter how many workers run.
pub fn measure(
    files: &[PathBuf],
    methods: &[(String, Method)],
    scale: usize,
) -> Result<MetricReport> {
    init_thread_pool()?;
    let per_image: Vec<Result<Vec<PairMetrics>>> = files
        .par_iter()
        .map(|path| {
            let hr = to_luma(&load_image(path)?)?;
            let hr = crop_to_multiple(&hr, scale)?;
            let lr = clamp_unit(degrade(&hr, scale)?);
            methods
                .iter()
                .map(|(_, m)| evaluate_pair(&upscale(m, &lr, scale)?, &hr, scale))
                .collect()
        })
        .collect();

    let mut scores = Vec::with_capacity(files.len());
    for r in per_image {
        scores.push(r?);
    }
    let mut report = MetricReport::default();
    for (mi, (label, _)) in methods.iter().enumerate() {
        for (path, image_scores) in files.iter().zip(&scores) {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            report.push(label, &name, image_scores[mi]);
        }
    }
    Ok(report)
}

pub fn run(
    data: &Path,
    methods_spec: &str,
    scale: usize,
    report_path: Option<&Path>,
) -> Result<MetricReport> {
    if scale == 0 {
        return Err(SrError::InvalidConfig("scale must be at least 1".into()));
    }
    let methods = parse_methods(methods_spec, scale)?;
    let files = sorted_pngs(data)?;
    if files.is_empty() {
        return Err(SrError::EmptyDataset(format!(
            "no png files in {}",
            data.display()
        )));
    }
    let report = measure(&files, &methods, scale)?;
    if let Some(path) = report_path {
        write_metric_csv(&report, path)?;
    }
    Ok(report)
}
