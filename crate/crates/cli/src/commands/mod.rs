//! One module per subcommand plus the plumbing they share.

pub mod bench;
pub mod degrade;
pub mod eval;
pub mod infer;
pub mod train;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use srres_core::color::rgb_to_y;
use srres_core::tensor::Tensor;
use srres_core::{Result, SrError};

/// Builds the global worker pool, sized by `SRRES_THREADS` when set.
/// Called once by the commands that fan work out over images; repeated
/// calls are no-ops.
pub fn init_thread_pool() -> Result<()> {
    static DONE: OnceLock<()> = OnceLock::new();
    let mut err = None;
    DONE.get_or_init(|| {
        if let Ok(raw) = std::env::var("SRRES_THREADS") {
            match raw.parse::<usize>() {
                Ok(n) if n >= 1 => {
                    // Failure here means a pool already exists, which only
                    // happens in-process in tests; the cap still applied
                    // to the first builder.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
                _ => {
                    err = Some(SrError::InvalidConfig(format!(
                        "SRRES_THREADS must be a positive integer, got {raw:?}"
                    )));
                }
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Luma plane of an image tensor: pass-through for grayscale, BT.601
/// conversion for RGB.
pub fn to_luma(img: &Tensor<f32>) -> Result<Tensor<f32>> {
    if img.shape().c == 3 {
        rgb_to_y(img)
    } else {
        Ok(img.clone())
    }
}

/// PNG files directly inside `dir`, sorted by filename so every walk of a
/// dataset is order-stable.
pub fn sorted_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("png"))
            .unwrap_or(false);
        if path.is_file() && is_png {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Clamps a prediction into the displayable range; metric scores and saved
/// images both see the clamped signal.
pub fn clamp_unit(mut t: Tensor<f32>) -> Tensor<f32> {
    t.clamp01_counting();
    t
}
