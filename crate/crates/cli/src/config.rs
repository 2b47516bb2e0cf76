//! Run configuration: defaults, a flat TOML key-value file, and flag
//! overrides, merged in that order (flag beats file beats default).

use std::path::{Path, PathBuf};

use srres_core::model::{BnPlacement, ModelConfig};
use srres_core::{Result, SrError};

/// Which parameter update rule the trainer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = SrError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(SrError::InvalidConfig(format!(
                "unknown optimizer {other:?}, expected \"adam\" or \"sgd\""
            ))),
        }
    }
}

/// Fully resolved settings for one training run. Field names double as the
/// TOML keys and (dash-separated) CLI flag names.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scale: usize,
    pub features: usize,
    pub mapping_layers: usize,
    pub feature_kernel: usize,
    pub mapping_kernel: usize,
    pub use_batchnorm: bool,
    pub bn_placement: BnPlacement,
    pub residual: bool,

    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip_norm: f64,

    pub data_root: PathBuf,
    /// Low-resolution patch side used for training crops.
    pub patch: usize,
    pub split_ratio: f64,
    pub seed: u64,
    pub hflip: bool,

    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scale: 2,
            features: 64,
            mapping_layers: 3,
            feature_kernel: 5,
            mapping_kernel: 3,
            use_batchnorm: false,
            bn_placement: BnPlacement::PreAct,
            residual: true,
            optimizer: OptimizerKind::Adam,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 16,
            epochs: 50,
            clip_norm: 0.0,
            data_root: PathBuf::from("data"),
            patch: 32,
            split_ratio: 0.9,
            seed: 42,
            hflip: false,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Optional values layered on top of a config; used for both the TOML file
/// and the command-line flags.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub scale: Option<usize>,
    pub features: Option<usize>,
    pub mapping_layers: Option<usize>,
    pub feature_kernel: Option<usize>,
    pub mapping_kernel: Option<usize>,
    pub use_batchnorm: Option<bool>,
    pub bn_placement: Option<BnPlacement>,
    pub residual: Option<bool>,
    pub optimizer: Option<OptimizerKind>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub clip_norm: Option<f64>,
    pub data_root: Option<PathBuf>,
    pub patch: Option<usize>,
    pub split_ratio: Option<f64>,
    pub seed: Option<u64>,
    pub hflip: Option<bool>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Merges defaults, an optional TOML file, and flag overrides, then
    /// validates the result.
    pub fn resolve(file: Option<&Path>, flags: &ConfigOverrides) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            let from_file = parse_toml(&text)
                .map_err(|e| SrError::InvalidConfig(format!("{}: {e}", path.display())))?;
            cfg.apply(&from_file);
        }
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &ConfigOverrides) {
        macro_rules! take {
            ($($f:ident),+ $(,)?) => {
                $(if let Some(v) = o.$f.clone() { self.$f = v; })+
            };
        }
        take!(
            scale,
            features,
            mapping_layers,
            feature_kernel,
            mapping_kernel,
            use_batchnorm,
            bn_placement,
            residual,
            optimizer,
            lr,
            beta1,
            beta2,
            batch_size,
            epochs,
            clip_norm,
            data_root,
            patch,
            split_ratio,
            seed,
            hflip,
            out_dir,
        );
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        let bad = |msg: String| Err(SrError::InvalidConfig(msg));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive and finite, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return bad(format!("clip_norm must be >= 0, got {}", self.clip_norm));
        }
        if self.patch == 0 {
            return bad("patch must be at least 1".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!(
                "split_ratio must lie strictly between 0 and 1, got {}",
                self.split_ratio
            ));
        }
        Ok(())
    }

    /// The architecture slice of the config. Training runs on the luma
    /// channel, so the input channel count is fixed at one.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            scale: self.scale,
            in_channels: 1,
            features: self.features,
            mapping_layers: self.mapping_layers,
            feature_kernel: self.feature_kernel,
            mapping_kernel: self.mapping_kernel,
            use_batchnorm: self.use_batchnorm,
            bn_placement: self.bn_placement,
            residual: self.residual,
        }
    }

    /// Serializes the resolved settings as the same flat TOML the loader
    /// accepts, so a run directory records exactly what produced it.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = writeln!(s, "scale = {}", self.scale);
        let _ = writeln!(s, "features = {}", self.features);
        let _ = writeln!(s, "mapping_layers = {}", self.mapping_layers);
        let _ = writeln!(s, "feature_kernel = {}", self.feature_kernel);
        let _ = writeln!(s, "mapping_kernel = {}", self.mapping_kernel);
        let _ = writeln!(s, "use_batchnorm = {}", self.use_batchnorm);
        let _ = writeln!(s, "bn_placement = \"{}\"", self.bn_placement);
        let _ = writeln!(s, "residual = {}", self.residual);
        let _ = writeln!(s, "optimizer = \"{}\"", self.optimizer.name());
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "beta1 = {}", self.beta1);
        let _ = writeln!(s, "beta2 = {}", self.beta2);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "clip_norm = {}", self.clip_norm);
        let _ = writeln!(s, "data_root = {:?}", self.data_root.display().to_string());
        let _ = writeln!(s, "patch = {}", self.patch);
        let _ = writeln!(s, "split_ratio = {}", self.split_ratio);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "hflip = {}", self.hflip);
        let _ = writeln!(s, "out_dir = {:?}", self.out_dir.display().to_string());
        s
    }
}

fn parse_toml(text: &str) -> std::result::Result<ConfigOverrides, String> {
    let table: toml::Table = text.parse().map_err(|e| format!("{e}"))?;
    let mut o = ConfigOverrides::default();
    for (key, value) in &table {
        set_key(&mut o, key, value)?;
    }
    Ok(o)
}

fn set_key(o: &mut ConfigOverrides, key: &str, v: &toml::Value) -> std::result::Result<(), String> {
    fn usize_of(v: &toml::Value, key: &str) -> std::result::Result<usize, String> {
        match v.as_integer() {
            Some(i) if i >= 0 => Ok(i as usize),
            _ => Err(format!(
                "key {key:?} expects a non-negative integer, got {v}"
            )),
        }
    }
    fn f64_of(v: &toml::Value, key: &str) -> std::result::Result<f64, String> {
        v.as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .ok_or_else(|| format!("key {key:?} expects a number, got {v}"))
    }
    fn bool_of(v: &toml::Value, key: &str) -> std::result::Result<bool, String> {
        v.as_bool()
            .ok_or_else(|| format!("key {key:?} expects true or false, got {v}"))
    }
    fn str_of<'a>(v: &'a toml::Value, key: &str) -> std::result::Result<&'a str, String> {
        v.as_str()
            .ok_or_else(|| format!("key {key:?} expects a string, got {v}"))
    }
    match key {
        "scale" => o.scale = Some(usize_of(v, key)?),
        "features" => o.features = Some(usize_of(v, key)?),
        "mapping_layers" => o.mapping_layers = Some(usize_of(v, key)?),
        "feature_kernel" => o.feature_kernel = Some(usize_of(v, key)?),
        "mapping_kernel" => o.mapping_kernel = Some(usize_of(v, key)?),
        "use_batchnorm" => o.use_batchnorm = Some(bool_of(v, key)?),
        "bn_placement" => {
            o.bn_placement = Some(str_of(v, key)?.parse().map_err(|e| format!("{e}"))?)
        }
        "residual" => o.residual = Some(bool_of(v, key)?),
        "optimizer" => o.optimizer = Some(str_of(v, key)?.parse().map_err(|e| format!("{e}"))?),
        "lr" => o.lr = Some(f64_of(v, key)?),
        "beta1" => o.beta1 = Some(f64_of(v, key)?),
        "beta2" => o.beta2 = Some(f64_of(v, key)?),
        "batch_size" => o.batch_size = Some(usize_of(v, key)?),
        "epochs" => o.epochs = Some(usize_of(v, key)?),
        "clip_norm" => o.clip_norm = Some(f64_of(v, key)?),
        "data_root" => o.data_root = Some(PathBuf::from(str_of(v, key)?)),
        "patch" => o.patch = Some(usize_of(v, key)?),
        "split_ratio" => o.split_ratio = Some(f64_of(v, key)?),
        "seed" => {
            let i = v
                .as_integer()
                .ok_or_else(|| format!("key \"seed\" expects an integer, got {v}"))?;
            o.seed = Some(i as u64);
        }
        "hflip" => o.hflip = Some(bool_of(v, key)?),
        "out_dir" => o.out_dir = Some(PathBuf::from(str_of(v, key)?)),
        other => return Err(format!("unknown config key {other:?}")),
    }
    Ok(())
}
