//! Timings for the hot paths: convolution, full-model inference, one
//! training step, resampling, and the quality metrics.
//!
//! Run with `cargo bench -p srres-bench`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use srres_core::baselines::{resample, ResampleMode, ResampleSpec};
use srres_core::layers::ConvParams;
use srres_core::metrics::{psnr, ssim, SsimParams};
use srres_core::model::{ModelConfig, SrModel};
use srres_core::optim::mse_loss;
use srres_core::rng::Rng;
use srres_core::tensor::{Shape, Tensor};

fn conv_layer(c: &mut Criterion) {
    let mut rng = Rng::seeded(1);
    let conv = ConvParams::<f32>::init(32, 32, 3, &mut rng).unwrap();
    let x = Tensor::<f32>::randn(Shape::new(1, 32, 32, 32), 1.0, &mut rng).unwrap();
    let mut group = c.benchmark_group("conv_3x3_32ch_32px");
    group.throughput(Throughput::Elements((32 * 32 * 32) as u64));
    group.bench_function("forward", |b| b.iter(|| black_box(conv.infer(&x).unwrap())));
    let (y, cache) = conv.forward(&x).unwrap();
    let dy = Tensor::<f32>::randn(y.shape(), 1.0, &mut rng).unwrap();
    group.bench_function("backward", |b| {
        b.iter(|| black_box(conv.backward(&dy, &cache).unwrap()))
    });
    group.finish();
}

fn model_infer(c: &mut Criterion) {
    let mut rng = Rng::seeded(2);
    let cfg = ModelConfig {
        features: 32,
        ..ModelConfig::default()
    };
    let model = SrModel::<f32>::init(cfg, &mut rng).unwrap();
    let mut group = c.benchmark_group("model_infer_x2");
    for side in [32usize, 64, 128] {
        let x = Tensor::<f32>::randn(Shape::new(1, 1, side, side), 0.2, &mut rng)
            .unwrap()
            .map(|v| (v + 0.5).clamp(0.0, 1.0));
        group.throughput(Throughput::Elements((side * side) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(side), &x, |b, x| {
            b.iter(|| black_box(model.infer(x).unwrap()))
        });
    }
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let mut rng = Rng::seeded(3);
    let cfg = ModelConfig {
        features: 32,
        ..ModelConfig::default()
    };
    let mut model = SrModel::<f32>::init(cfg, &mut rng).unwrap();
    let x = Tensor::<f32>::randn(Shape::new(8, 1, 16, 16), 0.2, &mut rng).unwrap();
    let t = Tensor::<f32>::randn(Shape::new(8, 1, 32, 32), 0.2, &mut rng).unwrap();
    c.bench_function("train_step_batch8_patch16", |b| {
        b.iter(|| {
            let (y, cache) = model.forward_train(&x).unwrap();
            let (_, d) = mse_loss(&y, &t).unwrap();
            black_box(model.backward(&d, &cache).unwrap())
        })
    });
}

fn resample_ops(c: &mut Criterion) {
    let mut rng = Rng::seeded(4);
    let hr = Tensor::<f32>::randn(Shape::new(1, 1, 256, 256), 0.2, &mut rng)
        .unwrap()
        .map(|v| (v + 0.5).clamp(0.0, 1.0));
    let lr = resample(
        &hr,
        ResampleSpec {
            mode: ResampleMode::Bicubic,
            scale: 0.5,
            antialias: true,
        },
    )
    .unwrap();
    c.bench_function("bicubic_downscale_256_to_128", |b| {
        b.iter(|| {
            black_box(
                resample(
                    &hr,
                    ResampleSpec {
                        mode: ResampleMode::Bicubic,
                        scale: 0.5,
                        antialias: true,
                    },
                )
                .unwrap(),
            )
        })
    });
    c.bench_function("bicubic_upscale_128_to_256", |b| {
        b.iter(|| {
            black_box(
                resample(
                    &lr,
                    ResampleSpec {
                        mode: ResampleMode::Bicubic,
                        scale: 2.0,
                        antialias: false,
                    },
                )
                .unwrap(),
            )
        })
    });
}

fn metric_ops(c: &mut Criterion) {
    let mut rng = Rng::seeded(5);
    let a = Tensor::<f32>::randn(Shape::new(1, 1, 256, 256), 0.2, &mut rng)
        .unwrap()
        .map(|v| (v + 0.5).clamp(0.0, 1.0));
    let b_img = a.map(|v| (v + 0.01).clamp(0.0, 1.0));
    c.bench_function("psnr_256px", |b| {
        b.iter(|| black_box(psnr(&a, &b_img).unwrap()))
    });
    let params = SsimParams::default();
    c.bench_function("ssim_256px", |b| {
        b.iter(|| black_box(ssim(&a, &b_img, &params).unwrap()))
    });
}

criterion_group!(
    benches,
    conv_layer,
    model_infer,
    train_step,
    resample_ops,
    metric_ops
);
criterion_main!(benches);
