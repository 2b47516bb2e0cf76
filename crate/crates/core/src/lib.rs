//! CPU-only single-image super-resolution.
//!
//! The crate trains and runs a small convolutional network that upscales
//! the luma channel of an image by an integer factor: a feature extraction
//! convolution, a stack of mapping blocks, and a reconstruction convolution
//! whose output is rearranged to full resolution by pixel shuffle, plus an
//! optional bicubic skip connection. Alongside the network live the
//! classical interpolation baselines (nearest, bilinear, bicubic), the
//! PSNR/SSIM metrics used to compare them, and a reproducible dataset
//! pipeline built on a deterministic PRNG.
//!
//! Everything is deterministic by construction: same seed, same config,
//! same bytes out. No threads are spawned here; parallel evaluation is the
//! caller's business and safe because all operations take shared references.

pub mod baselines;
pub mod checkpoint;
pub mod color;
pub mod data;
pub mod error;
pub mod layers;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use error::{Result, SrError};
pub use model::{BnPlacement, ModelConfig, SrModel};
pub use tensor::{Scalar, Shape, Tensor};
