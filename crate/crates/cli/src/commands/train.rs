//! Patch-based training with per-epoch validation. Runs single-threaded so
//! a given config and seed always reproduce the same checkpoint bytes.
//!
//! Per epoch the sampler draws enough random LR patches to cover the
//! training area once (`sum over images of ceil(lr_area / patch^2)`,
//! rounded up to whole batches). After each epoch the model is scored by
//! mean validation PSNR; the best-scoring weights are kept in `best.srck`
//! and the newest in `last.srck`, each with a JSON sidecar describing the
//! architecture.

use std::path::PathBuf;

use srres_core::checkpoint;
use srres_core::data::{build_manifest, sample_patches, Dataset, DatasetManifest};
use srres_core::metrics::psnr;
use srres_core::model::SrModel;
use srres_core::optim::{clip_grad_norm, mse_loss, OptimState};
use srres_core::rng::Rng;
use srres_core::tensor::{stack_batch, Tensor};
use srres_core::{Result, SrError};

use crate::commands::clamp_unit;
use crate::config::{OptimizerKind, RunConfig};
use crate::report::{write_train_log, TrainLogRow};

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: Vec<TrainLogRow>,
    pub best_val_psnr: f64,
    pub best_epoch: u64,
    pub steps: u64,
    pub best_path: PathBuf,
    pub last_path: PathBuf,
}

/// PSNR with a `border`-pixel frame discarded on every side, so boundary
/// extrapolation does not dominate small validation images.
fn border_psnr(sr: &Tensor<f32>, hr: &Tensor<f32>, border: usize) -> Result<f64> {
    let s = hr.shape();
    if s.h <= 2 * border || s.w <= 2 * border {
        return psnr(sr, hr);
    }
    let a = sr.crop_spatial(border, border, s.h - 2 * border, s.w - 2 * border)?;
    let b = hr.crop_spatial(border, border, s.h - 2 * border, s.w - 2 * border)?;
    psnr(&a, &b)
}

pub fn run(cfg: &RunConfig, resume: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;

    // The manifest freezes the train/val split; build and persist it on
    // first contact with a bare directory so later runs and eval see the
    // identical split.
    let manifest_path = cfg.data_root.join("manifest.json");
    let manifest = if manifest_path.is_file() {
        let m = DatasetManifest::load(&manifest_path)?;
        if m.scale != cfg.scale {
            return Err(SrError::InvalidConfig(format!(
                "manifest at {} was built for scale {}, config says {}; delete it to resplit",
                manifest_path.display(),
                m.scale,
                cfg.scale
            )));
        }
        m
    } else {
        let m = build_manifest(&cfg.data_root, cfg.scale, cfg.seed, cfg.split_ratio)?;
        m.save(&manifest_path)?;
        m
    };
    let ds = Dataset::load(&manifest, &cfg.data_root)?;
    if ds.train.is_empty() || ds.val.is_empty() {
        return Err(SrError::EmptyDataset(
            "training needs at least one train and one validation image".into(),
        ));
    }
    for im in &ds.train {
        let s = im.lr.shape();
        if s.h < cfg.patch || s.w < cfg.patch {
            return Err(SrError::InvalidConfig(format!(
                "patch {} does not fit into {}x{} LR image {}",
                cfg.patch, s.h, s.w, im.name
            )));
        }
    }

    let mut rng = Rng::seeded(cfg.seed);
    let mut model = SrModel::<f32>::init(cfg.model_config(), &mut rng)?;
    let last_path = cfg.out_dir.join("last.srck");
    let best_path = cfg.out_dir.join("best.srck");
    if resume {
        let loaded = checkpoint::load(&last_path)?;
        if loaded.config != model.config {
            return Err(SrError::InvalidConfig(format!(
                "checkpoint at {} does not match the configured architecture",
                last_path.display()
            )));
        }
        model = loaded;
    }
    std::fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml())?;

    let patch_area = cfg.patch * cfg.patch;
    let patches_per_epoch: usize = ds
        .train
        .iter()
        .map(|im| {
            let s = im.lr.shape();
            (s.h * s.w).div_ceil(patch_area)
        })
        .sum();
    let steps_per_epoch = patches_per_epoch.div_ceil(cfg.batch_size).max(1);

    let mut opt: OptimState<f32> = match cfg.optimizer {
        OptimizerKind::Adam => OptimState::adam(cfg.lr).with_betas(cfg.beta1, cfg.beta2),
        OptimizerKind::Sgd => OptimState::sgd(cfg.lr),
    };

    let mut log: Vec<TrainLogRow> = Vec::with_capacity(cfg.epochs);
    let mut best_val_psnr = f64::NEG_INFINITY;
    let mut best_epoch = 0u64;
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs as u64 {
        let mut loss_sum = 0.0f64;
        for _ in 0..steps_per_epoch {
            let mut lrs = Vec::with_capacity(cfg.batch_size);
            let mut hrs = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                let ix = rng.below(ds.train.len());
                let pair =
                    sample_patches(&ds.train[ix], cfg.scale, cfg.patch, 1, cfg.hflip, &mut rng)?
                        .pop()
                        .expect("asked for one patch");
                lrs.push(pair.lr);
                hrs.push(pair.hr);
            }
            let x = stack_batch(&lrs)?;
            let t = stack_batch(&hrs)?;

            let (pred, cache) = model.forward_train(&x)?;
            let (loss, d_pred) = mse_loss(&pred, &t)?;
            step += 1;
            if !loss.is_finite() {
                return Err(SrError::NonFiniteLoss { step });
            }
            let mut grads = model.backward(&d_pred, &cache)?;
            if cfg.clip_norm > 0.0 {
                let mut flat = grads.flat_mut();
                clip_grad_norm(&mut flat, cfg.clip_norm);
            }
            let flat = grads.flat();
            let mut params = model.trainable_mut();
            opt.step(&mut params, &flat)?;
            loss_sum += loss;
        }

        let mut psnr_sum = 0.0f64;
        for im in &ds.val {
            let sr = clamp_unit(model.infer(&im.lr)?);
            psnr_sum += border_psnr(&sr, &im.hr, cfg.scale)?;
        }
        let val_psnr = psnr_sum / ds.val.len() as f64;
        let train_loss = loss_sum / steps_per_epoch as f64;
        println!(
            "epoch {epoch}/{}: step {step}, train loss {train_loss:.6}, val PSNR {val_psnr:.3} dB",
            cfg.epochs
        );
        log.push(TrainLogRow {
            step,
            epoch,
            train_loss,
            val_psnr,
        });
        write_train_log(&log, &cfg.out_dir.join("training_log.csv"))?;
        checkpoint::save(&model, &last_path)?;
        if val_psnr > best_val_psnr {
            best_val_psnr = val_psnr;
            best_epoch = epoch;
            checkpoint::save(&model, &best_path)?;
        }
    }

    Ok(TrainOutcome {
        log,
        best_val_psnr,
        best_epoch,
        steps: step,
        best_path,
        last_path,
    })
}
