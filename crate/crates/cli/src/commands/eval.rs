//! Scores one trained checkpoint. When the data directory carries a
//! manifest the held-out validation images are used; otherwise every PNG
//! in the directory counts.

use std::path::{Path, PathBuf};

use srres_core::checkpoint;
use srres_core::data::{DatasetManifest, Split};
use srres_core::metrics::MetricReport;
use srres_core::{Result, SrError};

use crate::commands::bench::{measure, Method};
use crate::commands::sorted_pngs;
use crate::report::write_metric_csv;

pub fn run(ckpt: &Path, data: &Path, report_path: Option<&Path>) -> Result<MetricReport> {
    let model = checkpoint::load(ckpt)?;
    let scale = model.config.scale;
    let files = eval_files(data, scale)?;
    if files.is_empty() {
        return Err(SrError::EmptyDataset(format!(
            "no evaluation images under {}",
            data.display()
        )));
    }
    let label = format!("model:{}", ckpt.display());
    let methods = vec![(label, Method::Model(Box::new(model)))];
    let report = measure(&files, &methods, scale)?;
    if let Some(path) = report_path {
        write_metric_csv(&report, path)?;
    }
    Ok(report)
}

fn eval_files(data: &Path, scale: usize) -> Result<Vec<PathBuf>> {
    let manifest_path = data.join("manifest.json");
    if manifest_path.is_file() {
        let manifest = DatasetManifest::load(&manifest_path)?;
        if manifest.scale != scale {
            return Err(SrError::InvalidConfig(format!(
                "manifest at {} was built for scale {}, checkpoint uses {scale}",
                manifest_path.display(),
                manifest.scale
            )));
        }
        Ok(manifest
            .images
            .iter()
            .filter(|im| im.split == Split::Val)
            .map(|im| data.join(&im.name))
            .collect())
    } else {
        sorted_pngs(data)
    }
}
