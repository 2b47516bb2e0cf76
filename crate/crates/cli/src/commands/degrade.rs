//! Writes the low-resolution counterpart of every PNG in a directory:
//! crop to a multiple of the factor, antialiased bicubic downscale, clamp,
//! save under the same filename.

use std::path::Path;

use srres_core::baselines::{crop_to_multiple, degrade};
use srres_core::data::{load_image, save_gray_png, save_rgb_png};
use srres_core::{Result, SrError};

use crate::commands::{clamp_unit, sorted_pngs};

pub fn run(input: &Path, scale: usize, out: &Path) -> Result<usize> {
    if scale == 0 {
        return Err(SrError::InvalidConfig("scale must be at least 1".into()));
    }
    let files = sorted_pngs(input)?;
    if files.is_empty() {
        return Err(SrError::EmptyDataset(format!(
            "no png files in {}",
            input.display()
        )));
    }
    std::fs::create_dir_all(out)?;
    for path in &files {
        let img = load_image(path)?;
        let lr = clamp_unit(degrade(&crop_to_multiple(&img, scale)?, scale)?);
        let name = path.file_name().expect("listed file has a name");
        let dst = out.join(name);
        if lr.shape().c == 3 {
            save_rgb_png(&lr, &dst)?;
        } else {
            save_gray_png(&lr, &dst)?;
        }
    }
    Ok(files.len())
}
