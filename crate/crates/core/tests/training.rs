//! End-to-end optimization behavior on a small synthetic batch: loss goes
//! down, runs are bitwise repeatable, and divergence is observable.

use srres_core::baselines::degrade;
use srres_core::model::{ModelConfig, SrModel};
use srres_core::optim::{mse_loss, OptimState};
use srres_core::rng::Rng;
use srres_core::tensor::{Shape, Tensor};

/// Deterministic textured target: diagonal ramp with a superimposed
/// checker so the residual is not constant.
fn synthetic_hr(h: usize, w: usize) -> Tensor<f32> {
    let mut vals = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let ramp = (x + y) as f32 / (h + w) as f32;
            let checker = if (x / 2 + y / 2) % 2 == 0 {
                0.15
            } else {
                -0.15
            };
            vals.push((0.5 * ramp + 0.4 + checker).clamp(0.0, 1.0));
        }
    }
    Tensor::from_vec(Shape::new(1, 1, h, w), vals).unwrap()
}

fn small_config() -> ModelConfig {
    ModelConfig {
        features: 8,
        mapping_layers: 1,
        ..ModelConfig::default()
    }
}

/// One optimizer step over the whole batch; returns the pre-step loss.
fn train_step(
    model: &mut SrModel<f32>,
    lr_img: &Tensor<f32>,
    hr_img: &Tensor<f32>,
    opt: &mut OptimState<f32>,
) -> f64 {
    let (pred, cache) = model.forward_train(lr_img).unwrap();
    let (loss, d_pred) = mse_loss(&pred, hr_img).unwrap();
    let grads = model.backward(&d_pred, &cache).unwrap();
    let flat = grads.flat();
    let mut params = model.trainable_mut();
    opt.step(&mut params, &flat).unwrap();
    loss
}

#[test]
fn adam_reduces_loss_substantially() {
    let hr = synthetic_hr(16, 16);
    let lr_img = degrade(&hr, 2).unwrap();
    let mut rng = Rng::seeded(7);
    let mut model = SrModel::<f32>::init(small_config(), &mut rng).unwrap();
    let mut opt = OptimState::adam(1e-3);
    let mut losses = Vec::new();
    for _ in 0..60 {
        losses.push(train_step(&mut model, &lr_img, &hr, &mut opt));
    }
    let first = losses[0];
    let last = *losses.last().unwrap();
    assert!(last.is_finite());
    assert!(
        last < 0.5 * first,
        "loss {first:.6} -> {last:.6} did not halve in 60 steps"
    );
    // Later epochs do better than the first one on average as well.
    let head: f64 = losses[..5].iter().sum::<f64>() / 5.0;
    let tail: f64 = losses[55..].iter().sum::<f64>() / 5.0;
    assert!(tail < head, "mean loss head {head:.6} tail {tail:.6}");
}

#[test]
fn sgd_first_step_descends() {
    // A single small step along the negative gradient must reduce the loss.
    let hr = synthetic_hr(16, 16);
    let lr_img = degrade(&hr, 2).unwrap();
    let mut rng = Rng::seeded(11);
    let mut model = SrModel::<f32>::init(small_config(), &mut rng).unwrap();
    let mut opt = OptimState::sgd(1e-3);
    let before = train_step(&mut model, &lr_img, &hr, &mut opt);
    let (pred, _) = model.forward_train(&lr_img).unwrap();
    let (after, _) = mse_loss(&pred, &hr).unwrap();
    assert!(
        after < before,
        "sgd step went uphill: {before:.8} -> {after:.8}"
    );
}

#[test]
fn identical_seeds_train_to_identical_weights() {
    let hr = synthetic_hr(16, 16);
    let lr_img = degrade(&hr, 2).unwrap();
    let run = || {
        let mut rng = Rng::seeded(99);
        let mut model = SrModel::<f32>::init(small_config(), &mut rng).unwrap();
        let mut opt = OptimState::adam(1e-3);
        let mut losses = Vec::new();
        for _ in 0..10 {
            losses.push(train_step(&mut model, &lr_img, &hr, &mut opt));
        }
        (losses, srres_core::checkpoint::encode(&model))
    };
    let (losses_a, bytes_a) = run();
    let (losses_b, bytes_b) = run();
    assert_eq!(losses_a, losses_b);
    assert_eq!(
        bytes_a, bytes_b,
        "weight bytes diverged between identical runs"
    );
}

#[test]
fn runaway_learning_rate_is_observable() {
    let hr = synthetic_hr(16, 16);
    let lr_img = degrade(&hr, 2).unwrap();
    let mut rng = Rng::seeded(5);
    let mut model = SrModel::<f32>::init(small_config(), &mut rng).unwrap();
    let mut opt = OptimState::sgd(1e6);
    let mut went_nonfinite = false;
    for _ in 0..20 {
        let loss = train_step(&mut model, &lr_img, &hr, &mut opt);
        if !loss.is_finite() {
            went_nonfinite = true;
            break;
        }
    }
    assert!(
        went_nonfinite,
        "loss stayed finite under an absurd step size"
    );
}
