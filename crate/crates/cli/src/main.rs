use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand};

use srres_cli::commands;
use srres_cli::config::{ConfigOverrides, RunConfig};
use srres_cli::exit_code;
use srres_core::Result;

#[derive(Parser)]
#[command(
    name = "srres",
    version,
    about = "CPU single-image super-resolution: train, upscale, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model; settings come from --config with flag overrides
    Train(TrainArgs),
    /// Upscale one PNG with a trained checkpoint
    Infer {
        /// Checkpoint file (.srck)
        #[arg(long)]
        ckpt: PathBuf,
        /// Input PNG (grayscale or RGB)
        #[arg(long)]
        input: PathBuf,
        /// Output PNG path
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a dataset and write a CSV report
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        /// Dataset directory; uses the manifest's validation split when a
        /// manifest.json is present, every PNG otherwise
        #[arg(long)]
        data: PathBuf,
        /// Report CSV path
        #[arg(long)]
        report: PathBuf,
    },
    /// Compare upscaling methods (nearest, bilinear, bicubic, model:<ckpt>)
    Bench {
        /// Directory of ground-truth PNGs
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated method list
        #[arg(long)]
        methods: String,
        /// Upscaling factor
        #[arg(long)]
        scale: usize,
        /// Report CSV path
        #[arg(long)]
        report: PathBuf,
    },
    /// Write the degraded low-resolution counterpart of every PNG
    Degrade {
        /// Directory of source PNGs
        #[arg(long)]
        input: PathBuf,
        /// Downscaling factor
        #[arg(long)]
        scale: usize,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

/// Every config key is also a flag; flags beat the file, the file beats
/// the defaults.
#[derive(Args)]
struct TrainArgs {
    /// Flat TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue from <out_dir>/last.srck with a fresh optimizer
    #[arg(long)]
    resume: bool,

    #[arg(long)]
    scale: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    mapping_layers: Option<usize>,
    #[arg(long)]
    feature_kernel: Option<usize>,
    #[arg(long)]
    mapping_kernel: Option<usize>,
    #[arg(long)]
    use_batchnorm: Option<bool>,
    /// "pre_act" or "post_act"
    #[arg(long)]
    bn_placement: Option<String>,
    #[arg(long)]
    residual: Option<bool>,
    /// "adam" or "sgd"
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Global gradient-norm ceiling; 0 disables clipping
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Low-resolution patch side for training crops
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    split_ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hflip: Option<bool>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl TrainArgs {
    fn overrides(&self) -> Result<ConfigOverrides> {
        Ok(ConfigOverrides {
            scale: self.scale,
            features: self.features,
            mapping_layers: self.mapping_layers,
            feature_kernel: self.feature_kernel,
            mapping_kernel: self.mapping_kernel,
            use_batchnorm: self.use_batchnorm,
            bn_placement: self.bn_placement.as_deref().map(str::parse).transpose()?,
            residual: self.residual,
            optimizer: self.optimizer.as_deref().map(str::parse).transpose()?,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            batch_size: self.batch_size,
            epochs: self.epochs,
            clip_norm: self.clip_norm,
            data_root: self.data_root.clone(),
            patch: self.patch,
            split_ratio: self.split_ratio,
            seed: self.seed,
            hflip: self.hflip,
            out_dir: self.out_dir.clone(),
        })
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train(args) => {
            let cfg = RunConfig::resolve(args.config.as_deref(), &args.overrides()?)?;
            let outcome = commands::train::run(&cfg, args.resume)?;
            println!(
                "finished {} steps; best val PSNR {:.3} dB at epoch {} ({})",
                outcome.steps,
                outcome.best_val_psnr,
                outcome.best_epoch,
                outcome.best_path.display()
            );
        }
        Cmd::Infer { ckpt, input, out } => {
            commands::infer::run(&ckpt, &input, &out)?;
            println!("wrote {}", out.display());
        }
        Cmd::Eval { ckpt, data, report } => {
            let rep = commands::eval::run(&ckpt, &data, Some(&report))?;
            print_means(&rep);
            println!("wrote {}", report.display());
        }
        Cmd::Bench {
            data,
            methods,
            scale,
            report,
        } => {
            let rep = commands::bench::run(&data, &methods, scale, Some(&report))?;
            print_means(&rep);
            println!("wrote {}", report.display());
        }
        Cmd::Degrade { input, scale, out } => {
            let n = commands::degrade::run(&input, scale, &out)?;
            println!("degraded {n} images into {}", out.display());
        }
    }
    Ok(())
}

fn print_means(rep: &srres_core::metrics::MetricReport) {
    for method in rep.methods() {
        if let Some(m) = rep.mean_for(&method) {
            println!(
                "{method}: mean PSNR {:.4} dB, mean SSIM {:.5}",
                m.psnr_db, m.ssim
            );
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            exit(code);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        exit(exit_code(&e));
    }
}
