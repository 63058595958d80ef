//! Full-batch gradient descent on the network loss
//!
//! ```text
//! L(W) = Σ_μ (y_μ − f(x_μ; W))² + λ ‖W‖²_F
//! ```
//!
//! with `f(x; W) = Tr[X(x) S(W)]` and `S(W) = WᵀW/sqrt(m d)`. The step is
//! `W ← W − (η/n) ∇L(W)`: the learning rate acts on the per-sample loss.
//! Gradients go through `S`, so the cost of a step does not grow with `m`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    /// Student width `m`.
    pub width: usize,
    pub lambda: f64,
    pub eta: f64,
    pub steps: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl GdConfig {
    pub fn new(width: usize, lambda: f64, seed: u64) -> Self {
        Self {
            width,
            lambda,
            eta: 20.0,
            steps: 10_000,
            init_std: 1e-3,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GdOutput {
    pub weights: DMatrix<f64>,
    /// `S(Ŵ)`.
    pub estimate: DMatrix<f64>,
    /// Eigenvalues of `S(Ŵ)` from the singular values of `Ŵ`, decreasing.
    pub eigenvalues: Vec<f64>,
    pub loss: f64,
    /// Frobenius norm of `∇L / n` at the returned weights.
    pub grad_norm: f64,
    pub steps: usize,
}

/// `WᵀW / sqrt(m d)`.
pub fn weights_to_matrix(w: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, d) = w.shape();
    w.transpose() * w / ((m * d) as f64).sqrt()
}

fn loss_and_gradient(ds: &Dataset, w: &DMatrix<f64>, lambda: f64) -> (f64, DMatrix<f64>) {
    let (m, d) = w.shape();
    let s = weights_to_matrix(w);
    let r = ds.forward(&s) - &ds.labels;
    let loss = r.norm_squared() + lambda * w.norm_squared();
    let g = ds.adjoint(&r);
    let grad = w * g * (4.0 / ((m * d) as f64).sqrt()) + w * (2.0 * lambda);
    (loss, grad)
}

pub fn gd_train(ds: &Dataset, cfg: &GdConfig) -> Result<GdOutput, SimError> {
    let d = ds.dim();
    if cfg.width < d {
        return Err(SimError::config("width", format!("m = {} is below d = {d}", cfg.width)));
    }
    if !(cfg.eta > 0.0) || !(cfg.lambda >= 0.0) {
        return Err(SimError::config("eta", "learning rate must be positive and λ nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = DMatrix::from_fn(cfg.width, d, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        cfg.init_std * z
    });
    let rate = cfg.eta / ds.samples().max(1) as f64;
    let (mut loss, mut grad) = loss_and_gradient(ds, &w, cfg.lambda);
    let ceiling = 1e6 * loss.max(1.0);
    for step in 0..cfg.steps {
        w -= &grad * rate;
        (loss, grad) = loss_and_gradient(ds, &w, cfg.lambda);
        if !loss.is_finite() || loss > ceiling {
            return Err(SimError::LossBlowUp { step });
        }
    }
    let scale = ((cfg.width * d) as f64).sqrt();
    let sv = w.clone().try_svd(false, false, f64::EPSILON, 0).ok_or(SimError::Eigen)?;
    let mut eigenvalues: Vec<f64> = sv.singular_values.iter().map(|s| s * s / scale).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(GdOutput {
        eigenvalues,
        estimate: weights_to_matrix(&w),
        grad_norm: grad.norm() / ds.samples().max(1) as f64,
        weights: w,
        loss,
        steps: cfg.steps,
    })
}
