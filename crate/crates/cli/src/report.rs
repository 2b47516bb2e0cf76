//! CSV emission and parsing for metric tables and training logs.
//!
//! Floats are printed with `Display`, which picks the shortest string that
//! parses back to the same bits, and renders infinity as the literal
//! `inf`. Both tables therefore round-trip exactly.

use std::path::Path;

use srres_core::metrics::{MetricReport, MetricRow};
use srres_core::{Result, SrError};

pub const METRIC_HEADER: &str = "method,image,psnr_db,ssim";
pub const TRAIN_LOG_HEADER: &str = "step,epoch,train_loss,val_psnr";

/// Label used in the image column for the per-method mean rows appended
/// after the per-image rows.
pub const MEAN_LABEL: &str = "MEAN";

/// Renders per-image rows in insertion order followed by one `MEAN` row per
/// method in first-appearance order.
pub fn render_metric_csv(report: &MetricReport) -> String {
    let mut out = String::with_capacity(64 * (report.rows.len() + 2));
    out.push_str(METRIC_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.method, r.image, r.psnr_db, r.ssim
        ));
    }
    for method in report.methods() {
        let m = report.mean_for(&method).expect("method taken from report");
        out.push_str(&format!("{method},{MEAN_LABEL},{},{}\n", m.psnr_db, m.ssim));
    }
    out
}

pub fn write_metric_csv(report: &MetricReport, path: &Path) -> Result<()> {
    std::fs::write(path, render_metric_csv(report))?;
    Ok(())
}

/// Parses a metric CSV back into per-image rows and mean rows.
pub fn parse_metric_csv(text: &str) -> Result<(Vec<MetricRow>, Vec<MetricRow>)> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRIC_HEADER => {}
        other => {
            return Err(SrError::Decode(format!(
                "metric csv header {other:?}, expected {METRIC_HEADER:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for (ix, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(SrError::Decode(format!(
                "metric csv line {}: expected 4 fields, got {}",
                ix + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| SrError::Decode(format!("metric csv line {}: {e}", ix + 2)))
        };
        let row = MetricRow {
            method: fields[0].to_string(),
            image: fields[1].to_string(),
            psnr_db: parse(fields[2])?,
            ssim: parse(fields[3])?,
        };
        if row.image == MEAN_LABEL {
            means.push(row);
        } else {
            rows.push(row);
        }
    }
    Ok((rows, means))
}

/// One training-log line; a row is written after every epoch with the
/// epoch-averaged training loss and the mean validation PSNR.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    /// Total optimizer steps completed when the row was written.
    pub step: u64,
    /// 1-based epoch index.
    pub epoch: u64,
    pub train_loss: f64,
    pub val_psnr: f64,
}

pub fn render_train_log(rows: &[TrainLogRow]) -> String {
    let mut out = String::from(TRAIN_LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.step, r.epoch, r.train_loss, r.val_psnr
        ));
    }
    out
}

pub fn write_train_log(rows: &[TrainLogRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_train_log(rows))?;
    Ok(())
}

pub fn parse_train_log(text: &str) -> Result<Vec<TrainLogRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRAIN_LOG_HEADER => {}
        other => {
            return Err(SrError::Decode(format!(
                "train log header {other:?}, expected {TRAIN_LOG_HEADER:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (ix, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(SrError::Decode(format!(
                "train log line {}: expected 4 fields, got {}",
                ix + 2,
                fields.len()
            )));
        }
        let bad =
            |e: &dyn std::fmt::Display| SrError::Decode(format!("train log line {}: {e}", ix + 2));
        rows.push(TrainLogRow {
            step: fields[0].parse().map_err(|e| bad(&e))?,
            epoch: fields[1].parse().map_err(|e| bad(&e))?,
            train_loss: fields[2].parse().map_err(|e| bad(&e))?,
            val_psnr: fields[3].parse().map_err(|e| bad(&e))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use srres_core::metrics::PairMetrics;

    fn sample_report() -> MetricReport {
        // Dyadic values keep the mean rows exact, so the expected strings
        // below are stable byte for byte.
        let mut rep = MetricReport::default();
        rep.push(
            "bicubic",
            "a.png",
            PairMetrics {
                psnr_db: 30.25,
                ssim: 0.875,
            },
        );
        rep.push(
            "bicubic",
            "b.png",
            PairMetrics {
                psnr_db: f64::INFINITY,
                ssim: 1.0,
            },
        );
        rep.push(
            "nearest",
            "a.png",
            PairMetrics {
                psnr_db: 22.125,
                ssim: 0.625,
            },
        );
        rep.push(
            "nearest",
            "b.png",
            PairMetrics {
                psnr_db: 24.5,
                ssim: 0.75,
            },
        );
        rep
    }

    #[test]
    fn csv_layout_and_infinity_literal() {
        let text = render_metric_csv(&sample_report());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "method,image,psnr_db,ssim");
        assert_eq!(lines[1], "bicubic,a.png,30.25,0.875");
        assert_eq!(lines[2], "bicubic,b.png,inf,1");
        assert_eq!(lines[5], "bicubic,MEAN,inf,0.9375");
        assert_eq!(lines[6], "nearest,MEAN,23.3125,0.6875");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn csv_round_trips_and_means_recompute() {
        let rep = sample_report();
        let text = render_metric_csv(&rep);
        let (rows, means) = parse_metric_csv(&text).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(means.len(), 2);
        for mean in &means {
            let of_method: Vec<&MetricRow> =
                rows.iter().filter(|r| r.method == mean.method).collect();
            let psnr: f64 =
                of_method.iter().map(|r| r.psnr_db).sum::<f64>() / of_method.len() as f64;
            let ssim: f64 = of_method.iter().map(|r| r.ssim).sum::<f64>() / of_method.len() as f64;
            assert!((mean.psnr_db - psnr).abs() < 1e-9 || (mean.psnr_db == psnr));
            assert!((mean.ssim - ssim).abs() < 1e-9);
        }
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_metric_csv("method,image\n").is_err());
        assert!(parse_metric_csv("method,image,psnr_db,ssim\na,b,c\n").is_err());
        assert!(parse_metric_csv("method,image,psnr_db,ssim\na,b,x,1\n").is_err());
    }

    #[test]
    fn train_log_round_trips() {
        let rows = vec![
            TrainLogRow {
                step: 25,
                epoch: 1,
                train_loss: 0.0125,
                val_psnr: 28.5,
            },
            TrainLogRow {
                step: 50,
                epoch: 2,
                train_loss: 0.008,
                val_psnr: 29.75,
            },
        ];
        let text = render_train_log(&rows);
        assert!(text.starts_with("step,epoch,train_loss,val_psnr\n"));
        let back = parse_train_log(&text).unwrap();
        assert_eq!(back, rows);
    }
}
