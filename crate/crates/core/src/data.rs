//! Dataset pipeline: PNG decoding, split manifests, paired low/high
//! resolution images, and random patch sampling.
//!
//! Ground truth images are degraded in memory (crop to a multiple of the
//! scale, antialiased bicubic downscale, clamp to `[0, 1]`) as whole images
//! before any patch is cut, so patch boundaries never influence pixel
//! values. Training always consumes these in-memory float pairs; the
//! optional on-disk low-resolution cache is a quantized export for
//! inspection and is never read back.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{crop_to_multiple, degrade};
use crate::color::{dequantize_u8, quantize_u8, rgb_to_y};
use crate::error::{Result, SrError};
use crate::rng::Rng;
use crate::tensor::{Shape, Tensor};

/// Decodes a PNG into a `(1, c, h, w)` tensor on `[0, 1]`, with `c = 1` for
/// grayscale files and `c = 3` otherwise. Alpha is dropped.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| SrError::Decode(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(SrError::Decode(format!("{}: empty image", path.display())));
    }
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let mut t = Tensor::zeros(Shape::new(1, 3, h, w))?;
        for (y, row) in rgb.rows().enumerate() {
            for (x, px) in row.enumerate() {
                for c in 0..3 {
                    t.set(0, c, y, x, dequantize_u8(px.0[c]));
                }
            }
        }
        Ok(t)
    } else {
        let gray = img.to_luma8();
        let mut t = Tensor::zeros(Shape::new(1, 1, h, w))?;
        for (y, row) in gray.rows().enumerate() {
            for (x, px) in row.enumerate() {
                t.set(0, 0, y, x, dequantize_u8(px.0[0]));
            }
        }
        Ok(t)
    }
}

/// Decodes a PNG and reduces it to the luma channel.
pub fn load_image_y(path: &Path) -> Result<Tensor<f32>> {
    let t = load_image(path)?;
    if t.shape().c == 1 {
        Ok(t)
    } else {
        rgb_to_y(&t)
    }
}

/// Quantizes a `(1, 1, h, w)` tensor and writes it as an 8-bit grayscale PNG.
pub fn save_gray_png(t: &Tensor<f32>, path: &Path) -> Result<()> {
    let s = t.shape();
    if s.n != 1 || s.c != 1 {
        return Err(SrError::InvalidShape(format!(
            "save_gray_png wants (1, 1, h, w), got {s}"
        )));
    }
    let buf: Vec<u8> = t.data().iter().map(|&v| quantize_u8(v)).collect();
    image::save_buffer(
        path,
        &buf,
        s.w as u32,
        s.h as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| SrError::Decode(format!("{}: {e}", path.display())))
}

/// Quantizes a `(1, 3, h, w)` tensor and writes it as an 8-bit RGB PNG.
pub fn save_rgb_png(t: &Tensor<f32>, path: &Path) -> Result<()> {
    let s = t.shape();
    if s.n != 1 || s.c != 3 {
        return Err(SrError::InvalidShape(format!(
            "save_rgb_png wants (1, 3, h, w), got {s}"
        )));
    }
    let mut buf = Vec::with_capacity(s.h * s.w * 3);
    for y in 0..s.h {
        for x in 0..s.w {
            for c in 0..3 {
                buf.push(quantize_u8(t.at(0, c, y, x)));
            }
        }
    }
    image::save_buffer(
        path,
        &buf,
        s.w as u32,
        s.h as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| SrError::Decode(format!("{}: {e}", path.display())))
}

/// Which split an image belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// One image entry in a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub name: String,
    pub w: u32,
    pub h: u32,
    pub split: Split,
}

/// Reproducible description of a dataset: where it lives, the scale factor,
/// the seed that produced the split, and every image with its assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: String,
    pub scale: usize,
    pub seed: u64,
    pub images: Vec<ManifestImage>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.scale < 1 {
            return Err(SrError::InvalidConfig("manifest scale must be >= 1".into()));
        }
        let train = self
            .images
            .iter()
            .filter(|i| i.split == Split::Train)
            .count();
        let val = self.images.len() - train;
        if train == 0 || val == 0 {
            return Err(SrError::EmptyDataset(format!(
                "need at least one image per split, have {train} train and {val} val"
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)
            .map_err(|e| SrError::InvalidState(format!("manifest serialization failed: {e}")))?;
        json.push('\n');
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| SrError::Decode(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }
}

/// Scans `root` for PNG files, shuffles them with the seed, and assigns the
/// first `floor(ratio * n)` to the training split. Fails unless both splits
/// end up non-empty. Files are enumerated in sorted name order before the
/// shuffle, so the result depends only on directory content and seed.
pub fn build_manifest(
    root: &Path,
    scale: usize,
    seed: u64,
    train_ratio: f64,
) -> Result<DatasetManifest> {
    if !(0.0..=1.0).contains(&train_ratio) {
        return Err(SrError::InvalidConfig(format!(
            "train_ratio must be in [0, 1], got {train_ratio}"
        )));
    }
    let mut names: Vec<String> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_file() && name.to_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    if names.len() < 2 {
        return Err(SrError::EmptyDataset(format!(
            "{} holds {} PNG files, need at least 2 for a split",
            root.display(),
            names.len()
        )));
    }
    let mut rng = Rng::seeded(seed);
    rng.shuffle(&mut names);
    let n_train = ((train_ratio * names.len() as f64).floor() as usize).clamp(1, names.len() - 1);
    let mut images = Vec::with_capacity(names.len());
    for (i, name) in names.into_iter().enumerate() {
        let path = root.join(&name);
        let (w, h) = image::image_dimensions(&path)
            .map_err(|e| SrError::Decode(format!("{}: {e}", path.display())))?;
        images.push(ManifestImage {
            name,
            w,
            h,
            split: if i < n_train {
                Split::Train
            } else {
                Split::Val
            },
        });
    }
    let m = DatasetManifest {
        root: root.to_string_lossy().into_owned(),
        scale,
        seed,
        images,
    };
    m.validate()?;
    Ok(m)
}

/// A ground-truth image with its in-memory degraded counterpart.
#[derive(Debug, Clone)]
pub struct LoadedImage {
    pub name: String,
    /// `(1, 1, H, W)` luma, cropped so H and W are multiples of the scale.
    pub hr: Tensor<f32>,
    /// `(1, 1, H / r, W / r)` degraded luma, clamped to `[0, 1]`.
    pub lr: Tensor<f32>,
}

/// Both splits fully loaded and degraded.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub scale: usize,
    pub train: Vec<LoadedImage>,
    pub val: Vec<LoadedImage>,
    /// How many low-resolution values the degradation clamped back into
    /// `[0, 1]` (bicubic overshoot at sharp edges).
    pub clamped_lr: u64,
}

impl Dataset {
    /// Loads every manifest image from `root` in manifest order, verifying
    /// recorded dimensions, and degrades each one.
    pub fn load(manifest: &DatasetManifest, root: &Path) -> Result<Self> {
        manifest.validate()?;
        let mut out = Dataset {
            scale: manifest.scale,
            train: Vec::new(),
            val: Vec::new(),
            clamped_lr: 0,
        };
        for entry in &manifest.images {
            let path = root.join(&entry.name);
            let y = load_image_y(&path)?;
            let s = y.shape();
            if (s.w as u32, s.h as u32) != (entry.w, entry.h) {
                return Err(SrError::Decode(format!(
                    "{}: manifest says {}x{}, file is {}x{}",
                    entry.name, entry.w, entry.h, s.w, s.h
                )));
            }
            let hr = crop_to_multiple(&y, manifest.scale)?;
            let mut lr = degrade(&hr, manifest.scale)?;
            out.clamped_lr += lr.clamp01_counting();
            let img = LoadedImage {
                name: entry.name.clone(),
                hr,
                lr,
            };
            match entry.split {
                Split::Train => out.train.push(img),
                Split::Val => out.val.push(img),
            }
        }
        Ok(out)
    }
}

/// One training example: a low-resolution patch and its aligned ground
/// truth, relating as `hr = scale x lr` in both spatial dims.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub lr: Tensor<f32>,
    pub hr: Tensor<f32>,
}

/// Cuts `count` random aligned patch pairs from one image. `patch` is the
/// low-resolution patch side; the ground-truth patch is `scale` times
/// larger and starts at the scaled offset. With `hflip` each pair is
/// mirrored with probability one half. Consumes the random stream in a
/// fixed order (top, left, then the flip decision per patch).
pub fn sample_patches(
    img: &LoadedImage,
    scale: usize,
    patch: usize,
    count: usize,
    hflip: bool,
    rng: &mut Rng,
) -> Result<Vec<SamplePair>> {
    let ls = img.lr.shape();
    if patch < 1 || patch > ls.h || patch > ls.w {
        return Err(SrError::InvalidConfig(format!(
            "patch {patch} does not fit low-resolution image {}x{} ({})",
            ls.h, ls.w, img.name
        )));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let top = rng.below(ls.h - patch + 1);
        let left = rng.below(ls.w - patch + 1);
        let mut lr = img.lr.crop_spatial(top, left, patch, patch)?;
        let mut hr =
            img.hr
                .crop_spatial(top * scale, left * scale, patch * scale, patch * scale)?;
        if hflip && rng.below(2) == 1 {
            lr = lr.hflip();
            hr = hr.hflip();
        }
        out.push(SamplePair { lr, hr });
    }
    Ok(out)
}

/// `<root>/.lr_x<scale>`, where the quantized low-resolution export lives.
pub fn lr_cache_dir(root: &Path, scale: usize) -> PathBuf {
    root.join(format!(".lr_x{scale}"))
}

/// Writes every image's low-resolution counterpart as grayscale PNG into
/// the cache directory. Purely an export: the quantized files are never
/// read back by training.
pub fn write_lr_cache(images: &[LoadedImage], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for img in images {
        save_gray_png(&img.lr, &dir.join(&img.name))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quantized_noise(w: usize, h: usize, seed: u64) -> Tensor<f32> {
        let mut rng = Rng::seeded(seed);
        let data: Vec<f32> = (0..w * h)
            .map(|_| dequantize_u8(rng.below(256) as u8))
            .collect();
        Tensor::from_vec(Shape::new(1, 1, h, w), data).unwrap()
    }

    #[test]
    fn gray_png_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let t = quantized_noise(7, 5, 1);
        save_gray_png(&t, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rgb_png_round_trip_and_luma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let mut rng = Rng::seeded(2);
        let data: Vec<f32> = (0..3 * 4 * 4)
            .map(|_| dequantize_u8(rng.below(256) as u8))
            .collect();
        let t = Tensor::from_vec(Shape::new(1, 3, 4, 4), data).unwrap();
        save_rgb_png(&t, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back, t);
        let y = load_image_y(&path).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 4, 4));
        assert_eq!(y, rgb_to_y(&t).unwrap());
    }

    #[test]
    fn undecodable_file_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fake.png");
        fs::write(&path, b"not a png at all").unwrap();
        assert!(matches!(load_image(&path), Err(SrError::Decode(_))));
    }

    fn seed_dir(n: usize) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..n {
            let t = quantized_noise(12, 10, i as u64 + 10);
            save_gray_png(&t, &dir.path().join(format!("img_{i:02}.png"))).unwrap();
        }
        let p = dir.path().to_path_buf();
        (dir, p)
    }

    #[test]
    fn manifest_split_is_seeded_and_complete() {
        let (_g, root) = seed_dir(5);
        let a = build_manifest(&root, 2, 99, 0.8).unwrap();
        let b = build_manifest(&root, 2, 99, 0.8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.images.len(), 5);
        assert_eq!(
            a.images.iter().filter(|i| i.split == Split::Train).count(),
            4
        );
        assert_eq!(a.images.iter().filter(|i| i.split == Split::Val).count(), 1);
        assert_eq!((a.images[0].w, a.images[0].h), (12, 10));
        // Every file appears exactly once.
        let mut names: Vec<&str> = a.images.iter().map(|i| i.name.as_str()).collect();
        names.sort();
        assert_eq!(
            names,
            vec![
                "img_00.png",
                "img_01.png",
                "img_02.png",
                "img_03.png",
                "img_04.png"
            ]
        );
    }

    #[test]
    fn manifest_guarantees_both_splits() {
        let (_g, root) = seed_dir(2);
        // Ratio 1.0 would starve the validation split; the floor clamp keeps
        // one image out.
        let m = build_manifest(&root, 2, 1, 1.0).unwrap();
        assert!(m.images.iter().any(|i| i.split == Split::Val));
        let (_g2, root1) = seed_dir(1);
        assert!(matches!(
            build_manifest(&root1, 2, 1, 0.5),
            Err(SrError::EmptyDataset(_))
        ));
    }

    #[test]
    fn manifest_json_round_trip() {
        let (_g, root) = seed_dir(3);
        let m = build_manifest(&root, 3, 7, 0.5).unwrap();
        let path = root.join("manifest.json");
        m.save(&path).unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap(), m);
        let text = fs::read_to_string(&path).unwrap();
        for key in [
            "\"root\"",
            "\"scale\"",
            "\"seed\"",
            "\"images\"",
            "\"split\"",
        ] {
            assert!(text.contains(key), "missing {key} in {text}");
        }
    }

    #[test]
    fn dataset_pairs_are_aligned() {
        let (_g, root) = seed_dir(4);
        let m = build_manifest(&root, 2, 5, 0.75).unwrap();
        let ds = Dataset::load(&m, &root).unwrap();
        assert_eq!(ds.train.len(), 3);
        assert_eq!(ds.val.len(), 1);
        for img in ds.train.iter().chain(&ds.val) {
            let (hs, ls) = (img.hr.shape(), img.lr.shape());
            assert_eq!(hs.h, 2 * ls.h);
            assert_eq!(hs.w, 2 * ls.w);
            // Source images are 12x10; the crop trims 10 -> 10, 12 -> 12.
            assert_eq!((hs.h, hs.w), (10, 12));
            assert!(img.lr.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn dataset_rejects_stale_manifest_dims() {
        let (_g, root) = seed_dir(3);
        let mut m = build_manifest(&root, 2, 5, 0.5).unwrap();
        m.images[0].w += 2;
        let err = Dataset::load(&m, &root).unwrap_err();
        assert!(matches!(err, SrError::Decode(_)));
    }

    #[test]
    fn patches_deterministic_and_aligned() {
        let (_g, root) = seed_dir(3);
        let m = build_manifest(&root, 2, 5, 0.5).unwrap();
        let ds = Dataset::load(&m, &root).unwrap();
        let img = &ds.train[0];
        let mut r1 = Rng::seeded(77);
        let mut r2 = Rng::seeded(77);
        let a = sample_patches(img, 2, 4, 6, true, &mut r1).unwrap();
        let b = sample_patches(img, 2, 4, 6, true, &mut r2).unwrap();
        assert_eq!(a.len(), 6);
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.lr, pb.lr);
            assert_eq!(pa.hr, pb.hr);
            assert_eq!(pa.lr.shape(), Shape::new(1, 1, 4, 4));
            assert_eq!(pa.hr.shape(), Shape::new(1, 1, 8, 8));
        }
        // Oversized patches are a configuration error.
        let mut r3 = Rng::seeded(1);
        assert!(matches!(
            sample_patches(img, 2, 99, 1, false, &mut r3),
            Err(SrError::InvalidConfig(_))
        ));
    }

    #[test]
    fn lr_cache_writes_quantized_copies() {
        let (_g, root) = seed_dir(3);
        let m = build_manifest(&root, 2, 5, 0.5).unwrap();
        let ds = Dataset::load(&m, &root).unwrap();
        let cache = lr_cache_dir(&root, 2);
        write_lr_cache(&ds.train, &cache).unwrap();
        assert_eq!(cache, root.join(".lr_x2"));
        for img in &ds.train {
            let reloaded = load_image(&cache.join(&img.name)).unwrap();
            assert_eq!(reloaded.shape(), img.lr.shape());
            // Quantization noise only.
            for (&a, &b) in reloaded.data().iter().zip(img.lr.data()) {
                assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
    }
}
