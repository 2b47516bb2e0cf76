//! The super-resolution network: a feature extraction convolution, a stack
//! of mapping blocks, and a reconstruction convolution whose output is
//! rearranged to the target resolution by pixel shuffle. An optional global
//! skip adds the bicubic upscale of the input, so the network only has to
//! learn the residual detail.
//!
//! The model runs entirely at low resolution until the final shuffle, which
//! keeps convolution cost independent of the upscaling factor.

use serde::{Deserialize, Serialize};

use crate::baselines::bicubic_upscale;
use crate::error::{Result, SrError};
use crate::layers::{
    pixel_shuffle, pixel_unshuffle, relu_backward, relu_forward, BatchNormParams, BnCache, BnGrads,
    ConvCache, ConvGrads, ConvParams, ReluCache,
};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Where batch normalization sits inside a mapping block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnPlacement {
    /// conv -> norm -> relu (normalize pre-activation).
    PreAct,
    /// conv -> relu -> norm.
    PostAct,
}

impl std::str::FromStr for BnPlacement {
    type Err = SrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre_act" => Ok(BnPlacement::PreAct),
            "post_act" => Ok(BnPlacement::PostAct),
            other => Err(SrError::InvalidConfig(format!(
                "bn placement must be pre_act or post_act, got {other}"
            ))),
        }
    }
}

impl std::fmt::Display for BnPlacement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BnPlacement::PreAct => "pre_act",
            BnPlacement::PostAct => "post_act",
        })
    }
}

/// Architecture hyperparameters. Saved as a JSON sidecar next to every
/// checkpoint so weights can be reloaded without the training config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Upscaling factor `r >= 1`.
    pub scale: usize,
    /// Input and output channel count (1 = luma only).
    pub in_channels: usize,
    /// Width of the feature and mapping convolutions.
    pub features: usize,
    /// Number of mapping blocks between extraction and reconstruction.
    pub mapping_layers: usize,
    /// Kernel size of the feature extraction convolution (odd).
    pub feature_kernel: usize,
    /// Kernel size of mapping and reconstruction convolutions (odd).
    pub mapping_kernel: usize,
    /// Insert batch normalization into every mapping block.
    pub use_batchnorm: bool,
    pub bn_placement: BnPlacement,
    /// Add the bicubic upscale of the input to the network output.
    pub residual: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scale: 2,
            in_channels: 1,
            features: 64,
            mapping_layers: 3,
            feature_kernel: 5,
            mapping_kernel: 3,
            use_batchnorm: false,
            bn_placement: BnPlacement::PreAct,
            residual: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SrError::InvalidConfig(msg));
        if self.scale < 1 {
            return bad("scale must be >= 1".into());
        }
        if self.in_channels < 1 || self.features < 1 {
            return bad("channel counts must be >= 1".into());
        }
        if self.mapping_layers < 1 {
            return bad("mapping_layers must be >= 1".into());
        }
        for (name, k) in [
            ("feature_kernel", self.feature_kernel),
            ("mapping_kernel", self.mapping_kernel),
        ] {
            if k < 1 || k % 2 == 0 {
                return bad(format!("{name} must be odd and >= 1, got {k}"));
            }
        }
        Ok(())
    }
}

/// One mapping block: convolution, optional batch norm, ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<E: Scalar = f32> {
    pub conv: ConvParams<E>,
    pub bn: Option<BatchNormParams<E>>,
}

/// Forward state of one mapping block.
struct BlockCache<E: Scalar> {
    conv: ConvCache<E>,
    bn: Option<BnCache<E>>,
    relu: ReluCache,
}

/// Everything [`SrModel::backward`] needs from the preceding forward pass.
pub struct ForwardCache<E: Scalar = f32> {
    feat_conv: ConvCache<E>,
    feat_relu: ReluCache,
    blocks: Vec<BlockCache<E>>,
    recon_conv: ConvCache<E>,
}

impl<E: Scalar> ForwardCache<E> {
    /// Concatenated sign pattern of every rectifier in the pass that built
    /// this cache. Two passes with equal patterns saw the same active set,
    /// so the loss was smooth between the two parameter points.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = self.feat_relu.pattern().to_vec();
        for b in &self.blocks {
            out.extend_from_slice(b.relu.pattern());
        }
        out
    }
}

/// Parameter gradients in the same block structure as the model.
pub struct ModelGrads<E: Scalar = f32> {
    pub feat: ConvGrads<E>,
    pub blocks: Vec<(ConvGrads<E>, Option<BnGrads<E>>)>,
    pub recon: ConvGrads<E>,
}

impl<E: Scalar> ModelGrads<E> {
    /// Gradient slices in canonical parameter order, matching
    /// [`SrModel::trainable_mut`].
    pub fn flat(&self) -> Vec<&[E]> {
        let mut v: Vec<&[E]> = Vec::new();
        v.push(self.feat.d_weight.data());
        v.push(&self.feat.d_bias);
        for (conv, bn) in &self.blocks {
            v.push(conv.d_weight.data());
            v.push(&conv.d_bias);
            if let Some(bn) = bn {
                v.push(&bn.d_gamma);
                v.push(&bn.d_beta);
            }
        }
        v.push(self.recon.d_weight.data());
        v.push(&self.recon.d_bias);
        v
    }

    /// Mutable variant of [`ModelGrads::flat`], used by gradient clipping.
    pub fn flat_mut(&mut self) -> Vec<&mut [E]> {
        let mut v: Vec<&mut [E]> = Vec::new();
        v.push(self.feat.d_weight.data_mut());
        v.push(self.feat.d_bias.as_mut_slice());
        for (conv, bn) in &mut self.blocks {
            v.push(conv.d_weight.data_mut());
            v.push(conv.d_bias.as_mut_slice());
            if let Some(bn) = bn {
                v.push(bn.d_gamma.as_mut_slice());
                v.push(bn.d_beta.as_mut_slice());
            }
        }
        v.push(self.recon.d_weight.data_mut());
        v.push(self.recon.d_bias.as_mut_slice());
        v
    }
}

/// The full network with its architecture description.
#[derive(Debug, Clone, PartialEq)]
pub struct SrModel<E: Scalar = f32> {
    pub config: ModelConfig,
    pub feat: ConvParams<E>,
    pub map: Vec<ConvBlock<E>>,
    pub recon: ConvParams<E>,
}

impl<E: Scalar> SrModel<E> {
    /// He-initialized model. Layers consume the random stream in canonical
    /// order (feature, mapping blocks, reconstruction), so a given seed
    /// always produces the same weights.
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let feat = ConvParams::init(
            config.in_channels,
            config.features,
            config.feature_kernel,
            rng,
        )?;
        let mut map = Vec::with_capacity(config.mapping_layers);
        for _ in 0..config.mapping_layers {
            map.push(ConvBlock {
                conv: ConvParams::init(
                    config.features,
                    config.features,
                    config.mapping_kernel,
                    rng,
                )?,
                bn: config
                    .use_batchnorm
                    .then(|| BatchNormParams::init(config.features)),
            });
        }
        let mut recon = ConvParams::init(
            config.features,
            config.in_channels * config.scale * config.scale,
            config.mapping_kernel,
            rng,
        )?;
        if config.residual {
            // Start the residual branch close to the interpolation baseline:
            // a tenth of the fan-in scale keeps the initial correction small
            // so training refines detail instead of first unlearning noise.
            let tenth = E::from_f64c(0.1);
            recon.weight = recon.weight.map(|w| w * tenth);
        }
        Ok(SrModel {
            config,
            feat,
            map,
            recon,
        })
    }

    /// All-zero weights (checkpoint loading fills them in afterwards).
    pub fn empty(config: ModelConfig) -> Result<Self> {
        let mut rng = Rng::seeded(0);
        let mut m = Self::init(config, &mut rng)?;
        for p in m.trainable_mut() {
            for v in p {
                *v = E::zero();
            }
        }
        Ok(m)
    }

    fn check_input(&self, x: &Tensor<E>) -> Result<()> {
        if x.shape().c != self.config.in_channels {
            return Err(SrError::ShapeMismatch(format!(
                "model expects {} input channels, got {}",
                self.config.in_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Training forward pass. Mutable because batch norm folds batch
    /// statistics into its running estimates.
    pub fn forward_train(&mut self, x: &Tensor<E>) -> Result<(Tensor<E>, ForwardCache<E>)> {
        self.check_input(x)?;
        let placement = self.config.bn_placement;
        let (h, feat_conv) = self.feat.forward(x)?;
        let (mut h, feat_relu) = relu_forward(&h);
        let mut blocks = Vec::with_capacity(self.map.len());
        for block in &mut self.map {
            let (conv_out, conv) = block.conv.forward(&h)?;
            let (out, bn, relu) = match (&mut block.bn, placement) {
                (None, _) => {
                    let (y, relu) = relu_forward(&conv_out);
                    (y, None, relu)
                }
                (Some(bn), BnPlacement::PreAct) => {
                    let (normed, cache) = bn.forward_train(&conv_out)?;
                    let (y, relu) = relu_forward(&normed);
                    (y, Some(cache), relu)
                }
                (Some(bn), BnPlacement::PostAct) => {
                    let (act, relu) = relu_forward(&conv_out);
                    let (y, cache) = bn.forward_train(&act)?;
                    (y, Some(cache), relu)
                }
            };
            h = out;
            blocks.push(BlockCache { conv, bn, relu });
        }
        let (pre, recon_conv) = self.recon.forward(&h)?;
        let up = pixel_shuffle(&pre, self.config.scale)?;
        let out = if self.config.residual {
            up.add(&bicubic_upscale(x, self.config.scale)?)?
        } else {
            up
        };
        Ok((
            out,
            ForwardCache {
                feat_conv,
                feat_relu,
                blocks,
                recon_conv,
            },
        ))
    }

    /// Inference forward pass: batch norm uses running statistics and no
    /// caches are kept. Output is linear and unclamped.
    pub fn infer(&self, x: &Tensor<E>) -> Result<Tensor<E>> {
        self.check_input(x)?;
        let placement = self.config.bn_placement;
        let relu = |t: &Tensor<E>| t.map(|v| if v > E::zero() { v } else { E::zero() });
        let mut h = relu(&self.feat.infer(x)?);
        for block in &self.map {
            let conv_out = block.conv.infer(&h)?;
            h = match (&block.bn, placement) {
                (None, _) => relu(&conv_out),
                (Some(bn), BnPlacement::PreAct) => relu(&bn.forward_eval(&conv_out)?),
                (Some(bn), BnPlacement::PostAct) => bn.forward_eval(&relu(&conv_out))?,
            };
        }
        let up = pixel_shuffle(&self.recon.infer(&h)?, self.config.scale)?;
        if self.config.residual {
            up.add(&bicubic_upscale(x, self.config.scale)?)
        } else {
            Ok(up)
        }
    }

    /// Backpropagates `d_out` through the cached forward pass. The residual
    /// skip carries no parameters, so its gradient passes straight through
    /// the pixel unshuffle into the reconstruction convolution.
    pub fn backward(&self, d_out: &Tensor<E>, cache: &ForwardCache<E>) -> Result<ModelGrads<E>> {
        let placement = self.config.bn_placement;
        let d = pixel_unshuffle(d_out, self.config.scale)?;
        let (mut d, recon) = self.recon.backward(&d, &cache.recon_conv)?;
        let mut blocks_rev = Vec::with_capacity(self.map.len());
        for (block, bc) in self.map.iter().zip(&cache.blocks).rev() {
            let (d_conv_out, bn_grads) = match (&block.bn, &bc.bn, placement) {
                (None, _, _) => (relu_backward(&d, &bc.relu), None),
                (Some(bn), Some(bn_cache), BnPlacement::PreAct) => {
                    let d_normed = relu_backward(&d, &bc.relu);
                    let (d_conv, g) = bn.backward(&d_normed, bn_cache)?;
                    (d_conv, Some(g))
                }
                (Some(bn), Some(bn_cache), BnPlacement::PostAct) => {
                    let (d_act, g) = bn.backward(&d, bn_cache)?;
                    (relu_backward(&d_act, &bc.relu), Some(g))
                }
                _ => {
                    return Err(SrError::InvalidState(
                        "forward cache does not match model batch norm layout".into(),
                    ))
                }
            };
            let (d_in, conv_grads) = block.conv.backward(&d_conv_out, &bc.conv)?;
            d = d_in;
            blocks_rev.push((conv_grads, bn_grads));
        }
        blocks_rev.reverse();
        let d_feat = relu_backward(&d, &cache.feat_relu);
        let (_, feat) = self.feat.backward(&d_feat, &cache.feat_conv)?;
        Ok(ModelGrads {
            feat,
            blocks: blocks_rev,
            recon,
        })
    }

    /// Mutable slices of every trainable parameter in canonical order:
    /// feature weight and bias, then each mapping block's weight, bias, and
    /// (when present) gamma and beta, then reconstruction weight and bias.
    /// Batch norm running statistics are not trainable and are excluded.
    pub fn trainable_mut(&mut self) -> Vec<&mut [E]> {
        let mut v: Vec<&mut [E]> = Vec::new();
        v.push(self.feat.weight.data_mut());
        v.push(self.feat.bias.as_mut_slice());
        for block in &mut self.map {
            v.push(block.conv.weight.data_mut());
            v.push(block.conv.bias.as_mut_slice());
            if let Some(bn) = &mut block.bn {
                v.push(bn.gamma.as_mut_slice());
                v.push(bn.beta.as_mut_slice());
            }
        }
        v.push(self.recon.weight.data_mut());
        v.push(self.recon.bias.as_mut_slice());
        v
    }

    /// Total trainable parameter count.
    pub fn param_count(&mut self) -> usize {
        self.trainable_mut().iter().map(|p| p.len()).sum()
    }

    /// Every stored tensor in serialization order: like the trainable set
    /// but with batch norm running statistics after gamma and beta.
    pub fn state_slices(&self) -> Vec<&[E]> {
        let mut v: Vec<&[E]> = Vec::new();
        v.push(self.feat.weight.data());
        v.push(&self.feat.bias);
        for block in &self.map {
            v.push(block.conv.weight.data());
            v.push(&block.conv.bias);
            if let Some(bn) = &block.bn {
                v.push(&bn.gamma);
                v.push(&bn.beta);
                v.push(&bn.running_mean);
                v.push(&bn.running_var);
            }
        }
        v.push(self.recon.weight.data());
        v.push(&self.recon.bias);
        v
    }

    /// Mutable variant of [`SrModel::state_slices`].
    pub fn state_slices_mut(&mut self) -> Vec<&mut [E]> {
        let mut v: Vec<&mut [E]> = Vec::new();
        v.push(self.feat.weight.data_mut());
        v.push(self.feat.bias.as_mut_slice());
        for block in &mut self.map {
            v.push(block.conv.weight.data_mut());
            v.push(block.conv.bias.as_mut_slice());
            if let Some(bn) = &mut block.bn {
                v.push(bn.gamma.as_mut_slice());
                v.push(bn.beta.as_mut_slice());
                v.push(bn.running_mean.as_mut_slice());
                v.push(bn.running_var.as_mut_slice());
            }
        }
        v.push(self.recon.weight.data_mut());
        v.push(self.recon.bias.as_mut_slice());
        v
    }

    /// Converts every parameter (including running statistics) to another
    /// element type through `f64`.
    pub fn cast<F: Scalar>(&self) -> SrModel<F> {
        let conv = |c: &ConvParams<E>| ConvParams {
            weight: c.weight.cast::<F>(),
            bias: c.bias.iter().map(|&b| F::from_f64c(b.to_f64c())).collect(),
            pad: c.pad,
        };
        let vec = |v: &[E]| -> Vec<F> { v.iter().map(|&x| F::from_f64c(x.to_f64c())).collect() };
        SrModel {
            config: self.config.clone(),
            feat: conv(&self.feat),
            map: self
                .map
                .iter()
                .map(|b| ConvBlock {
                    conv: conv(&b.conv),
                    bn: b.bn.as_ref().map(|bn| BatchNormParams {
                        gamma: vec(&bn.gamma),
                        beta: vec(&bn.beta),
                        running_mean: vec(&bn.running_mean),
                        running_var: vec(&bn.running_var),
                        momentum: bn.momentum,
                        eps: bn.eps,
                    }),
                })
                .collect(),
            recon: conv(&self.recon),
        }
    }
}
