//! Mean-squared-error loss, SGD and Adam parameter updates, global-norm
//! gradient clipping, and finite-difference gradient verification.

use crate::error::{Result, SrError};
use crate::model::SrModel;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Mean squared error over every element, with its gradient
/// `2 * (pred - target) / N`. The loss accumulates in `f64` regardless of
/// the element type; the gradient stays in the element type.
pub fn mse_loss<E: Scalar>(pred: &Tensor<E>, target: &Tensor<E>) -> Result<(f64, Tensor<E>)> {
    if pred.shape() != target.shape() {
        return Err(SrError::ShapeMismatch(format!(
            "mse_loss: {} vs {}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.numel() as f64;
    let mut sum = 0.0f64;
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p.to_f64c() - t.to_f64c();
        sum += d * d;
    }
    let scale = E::from_f64c(2.0 / n);
    let grad = pred.sub(target)?.scale(scale);
    Ok((sum / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OptKind {
    Sgd,
    Adam,
}

/// Optimizer state. Adam keeps first and second moment estimates per
/// parameter tensor with bias correction; the defaults are the conventional
/// constants (0.9, 0.999, 1e-8). The step counter advances once per
/// [`OptimState::step`] call, not per tensor.
#[derive(Debug, Clone)]
pub struct OptimState<E: Scalar = f32> {
    kind: OptKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    t: u64,
    m: Vec<Vec<E>>,
    v: Vec<Vec<E>>,
}

impl<E: Scalar> OptimState<E> {
    pub fn sgd(lr: f64) -> Self {
        OptimState {
            kind: OptKind::Sgd,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimState {
            kind: OptKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Replaces the Adam decay rates. Ignored by SGD.
    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update to every parameter slice. Slices must line up with
    /// the gradients one to one; Adam moment buffers are allocated on the
    /// first call and must keep the same sizes afterwards.
    pub fn step(&mut self, params: &mut [&mut [E]], grads: &[&[E]]) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(SrError::InvalidState(
                "optimizer given mismatched parameter and gradient slices".into(),
            ));
        }
        self.t += 1;
        let lr = E::from_f64c(self.lr);
        match self.kind {
            OptKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, &gv) in p.iter_mut().zip(*g) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![E::zero(); g.len()]).collect();
                    self.v = self.m.clone();
                }
                if self.m.len() != grads.len()
                    || self.m.iter().zip(grads).any(|(m, g)| m.len() != g.len())
                {
                    return Err(SrError::InvalidState(
                        "optimizer state does not match gradient layout".into(),
                    ));
                }
                let b1 = E::from_f64c(self.beta1);
                let b2 = E::from_f64c(self.beta2);
                let eps = E::from_f64c(1e-8);
                let corr1 = E::one() - b1.powi(self.t as i32);
                let corr2 = E::one() - b2.powi(self.t as i32);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    for i in 0..p.len() {
                        let gv = g[i];
                        m[i] = b1 * m[i] + (E::one() - b1) * gv;
                        v[i] = b2 * v[i] + (E::one() - b2) * gv * gv;
                        let m_hat = m[i] / corr1;
                        let v_hat = v[i] / corr2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Scales all gradients by `max_norm / norm` when their joint Euclidean norm
/// exceeds `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm<E: Scalar>(grads: &mut [&mut [E]], max_norm: f64) -> f64 {
    let mut sq = 0.0f64;
    for g in grads.iter() {
        for &v in g.iter() {
            let f = v.to_f64c();
            sq += f * f;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = E::from_f64c(max_norm / norm);
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }
    norm
}

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates excluded because the probe crossed a rectifier kink.
    pub skipped: usize,
    pub pass: bool,
}

/// Compares analytic gradients of the training loss against central
/// differences with step `1e-4`, sampling up to `samples_per_tensor`
/// coordinates of every trainable tensor. The relative error of a
/// coordinate is `|a - n| / max(|a|, |n|, 1e-8)`; the check passes when the
/// worst coordinate stays within `tol`. Runs in `f64` so truncation, not
/// representation, dominates the difference.
///
/// Coordinates where both sides are below `1e-10` count as agreeing on
/// zero. Some gradients vanish exactly (a conv bias feeding straight into
/// batch normalization is cancelled by the mean subtraction) while central
/// differences only resolve magnitudes down to roundoff of the loss over
/// the step, around `1e-12` here, which would otherwise read as error.
///
/// Coordinates whose probe flips a rectifier between the two evaluation
/// points are skipped and counted in the report: the loss has a kink on
/// that interval, so a central difference there measures the kink, not the
/// gradient the backward pass is defined to produce.
pub fn grad_check(
    model: &mut SrModel<f64>,
    x: &Tensor<f64>,
    target: &Tensor<f64>,
    samples_per_tensor: usize,
    rng: &mut Rng,
    tol: f64,
) -> Result<GradCheckReport> {
    const H: f64 = 1e-4;
    let (y, cache) = model.forward_train(x)?;
    let (_, d_pred) = mse_loss(&y, target)?;
    let grads = model.backward(&d_pred, &cache)?;
    let analytic: Vec<Vec<f64>> = grads.flat().iter().map(|g| g.to_vec()).collect();

    let mut max_rel_err = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for ti in 0..analytic.len() {
        let len = analytic[ti].len();
        let picks: Vec<usize> = if len <= samples_per_tensor {
            (0..len).collect()
        } else {
            (0..samples_per_tensor).map(|_| rng.below(len)).collect()
        };
        for j in picks {
            let orig = model.trainable_mut()[ti][j];
            model.trainable_mut()[ti][j] = orig + H;
            let (yp, cache_p) = model.forward_train(x)?;
            let (lp, _) = mse_loss(&yp, target)?;
            model.trainable_mut()[ti][j] = orig - H;
            let (ym, cache_m) = model.forward_train(x)?;
            let (lm, _) = mse_loss(&ym, target)?;
            model.trainable_mut()[ti][j] = orig;
            if cache_p.activation_pattern() != cache_m.activation_pattern() {
                skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * H);
            let a = analytic[ti][j];
            let rel = if a.abs() < 1e-10 && numeric.abs() < 1e-10 {
                0.0
            } else {
                (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8)
            };
            if rel > max_rel_err {
                max_rel_err = rel;
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        checked,
        skipped,
        pass: max_rel_err <= tol,
    })
}
