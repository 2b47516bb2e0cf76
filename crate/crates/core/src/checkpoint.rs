//! Checkpoint serialization.
//!
//! A checkpoint is two files: a binary weight file and a JSON sidecar at
//! `<path>.json` holding the [`ModelConfig`]. The binary layout, all little
//! endian:
//!
//! ```text
//! magic   4 bytes  "SRCK"
//! version u32      currently 1
//! count   u32      number of tensors
//! per tensor:
//!   name_len u16, name UTF-8,
//!   dtype    u8   (0 = f32),
//!   rank     u8,
//!   dims     rank x u64,
//!   payload  product(dims) x f32
//! ```
//!
//! Tensors appear in a fixed canonical order derived from the config
//! (feature block, mapping blocks in index order, reconstruction block; each
//! block stores weight, bias, then gamma, beta, running mean, running
//! variance when batch norm is present). Loading verifies the sequence
//! strictly, so a checkpoint written by one build loads bit-identically in
//! another or fails loudly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Result, SrError};
use crate::model::{ModelConfig, SrModel};

pub const MAGIC: [u8; 4] = *b"SRCK";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

/// `<path>.json`, the config sidecar of a checkpoint.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Canonical `(name, dims)` sequence for a config.
fn tensor_plan(cfg: &ModelConfig) -> Vec<(String, Vec<u64>)> {
    let mut plan = Vec::new();
    let conv =
        |prefix: &str, out_c: usize, in_c: usize, k: usize, plan: &mut Vec<(String, Vec<u64>)>| {
            plan.push((
                format!("{prefix}.weight"),
                vec![out_c as u64, in_c as u64, k as u64, k as u64],
            ));
            plan.push((format!("{prefix}.bias"), vec![out_c as u64]));
        };
    conv(
        "feat.0",
        cfg.features,
        cfg.in_channels,
        cfg.feature_kernel,
        &mut plan,
    );
    for i in 0..cfg.mapping_layers {
        conv(
            &format!("map.{i}"),
            cfg.features,
            cfg.features,
            cfg.mapping_kernel,
            &mut plan,
        );
        if cfg.use_batchnorm {
            for part in ["bn_gamma", "bn_beta", "bn_running_mean", "bn_running_var"] {
                plan.push((format!("map.{i}.{part}"), vec![cfg.features as u64]));
            }
        }
    }
    conv(
        "recon.0",
        cfg.in_channels * cfg.scale * cfg.scale,
        cfg.features,
        cfg.mapping_kernel,
        &mut plan,
    );
    plan
}

/// Serializes the weight file contents (without touching disk).
pub fn encode(model: &SrModel<f32>) -> Vec<u8> {
    let plan = tensor_plan(&model.config);
    let slices = model.state_slices();
    debug_assert_eq!(plan.len(), slices.len());
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(plan.len() as u32).to_le_bytes());
    for ((name, dims), data) in plan.iter().zip(slices) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F32);
        out.push(dims.len() as u8);
        for d in dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Writes the weight file and its config sidecar.
pub fn save(model: &SrModel<f32>, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(model))?;
    let mut json = serde_json::to_string_pretty(&model.config)
        .map_err(|e| SrError::Checkpoint(format!("config serialization failed: {e}")))?;
    json.push('\n');
    fs::write(sidecar_path(path), json)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(SrError::Checkpoint(format!(
                "file truncated while reading {what} (offset {})",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

/// Reads a checkpoint written by [`save`], verifying the layout against the
/// sidecar config.
pub fn load(path: &Path) -> Result<SrModel<f32>> {
    let sidecar = sidecar_path(path);
    let cfg_text = fs::read_to_string(&sidecar).map_err(|e| {
        SrError::Checkpoint(format!("missing config sidecar {}: {e}", sidecar.display()))
    })?;
    let config: ModelConfig = serde_json::from_str(&cfg_text)
        .map_err(|e| SrError::Checkpoint(format!("bad config sidecar: {e}")))?;
    config.validate()?;

    let buf = fs::read(path)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(SrError::Checkpoint(
            "bad magic, not a checkpoint file".into(),
        ));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(SrError::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let plan = tensor_plan(&config);
    let count = cur.u32("tensor count")? as usize;
    if count != plan.len() {
        return Err(SrError::Checkpoint(format!(
            "{count} tensors in file, config implies {}",
            plan.len()
        )));
    }

    let mut model = SrModel::<f32>::empty(config)?;
    let mut slices = model.state_slices_mut();
    for ((name, dims), slot) in plan.iter().zip(slices.iter_mut()) {
        let name_len = cur.u16("name length")? as usize;
        let got_name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|_| SrError::Checkpoint("tensor name is not UTF-8".into()))?;
        if got_name != name {
            return Err(SrError::Checkpoint(format!(
                "expected tensor {name}, found {got_name}"
            )));
        }
        let dtype = cur.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(SrError::Checkpoint(format!(
                "{name}: unsupported dtype {dtype}"
            )));
        }
        let rank = cur.u8("rank")? as usize;
        if rank != dims.len() {
            return Err(SrError::Checkpoint(format!(
                "{name}: rank {rank}, expected {}",
                dims.len()
            )));
        }
        for (i, &want) in dims.iter().enumerate() {
            let got = cur.u64("dims")?;
            if got != want {
                return Err(SrError::Checkpoint(format!(
                    "{name}: dim {i} is {got}, expected {want}"
                )));
            }
        }
        let payload = cur.take(slot.len() * 4, name)?;
        for (dst, chunk) in slot.iter_mut().zip(payload.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if cur.pos != buf.len() {
        return Err(SrError::Checkpoint(format!(
            "{} trailing bytes after last tensor",
            buf.len() - cur.pos
        )));
    }
    drop(slices);
    Ok(model)
}
