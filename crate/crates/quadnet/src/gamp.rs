//! GAMP for the PSD matrix-sensing problem
//!
//! ```text
//! min_{S ⪰ 0}  Σ_μ (y_μ − Tr[X^μ S])² + d λ̃ Tr S + (d τ/2) ‖S‖²_F
//! ```
//!
//! run in the vector coordinates `w = sqrt(d/2) vec(S)` with sensing rows
//! `A^μ = vec(X^μ)/sqrt(d+1)`. Vectors of length `D` are carried as their
//! symmetric matrix images, so `A` is never formed: `A x` and `Aᵀ g` are
//! trace contractions against the stored sensing matrices.

use nalgebra::{DMatrix, DVector};
use quadnet_core::{ModelParams, SeState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{sample_goe, Dataset};
use crate::denoise::{spectral_denoise_matrix, OutputChannel};
use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GampConfig {
    pub max_iter: usize,
    /// Stop when `‖Ŝ_t − Ŝ_{t−1}‖_F / ‖Ŝ_t‖_F` falls below this.
    pub tol: f64,
    /// Weight of the new `u` iterate; 1 is undamped.
    pub damping: f64,
    /// Output variance `b` used before the first input step.
    pub initial_width: f64,
    /// Norm of `Ŝ` (per `sqrt(d)`) regarded as a blow-up.
    pub blowup: f64,
}

impl Default for GampConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            damping: 1.0,
            initial_width: 1.0,
            blowup: 1e6,
        }
    }
}

/// Starting point of the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GampInit {
    /// `Ŝ = 0`, no memory term.
    Zero,
    /// `u⁰ = m̂ u* + sqrt(q̂) z` with the Onsager scalars of a state-evolution
    /// fixed point; `seed` drives `z`.
    FixedPoint { state: SeState, seed: u64 },
}

/// Scalar summary of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GampIterate {
    /// `Tr[Ŝ S*]/d`.
    pub m: f64,
    /// `‖Ŝ‖²_F/d`.
    pub q: f64,
    /// Output variance `b_t = (1/D) ∇·e`.
    pub onsager_b: f64,
    /// Input precision `d_t = −(1/D) Σ ∂g`.
    pub onsager_d: f64,
    pub change: f64,
}

#[derive(Debug, Clone)]
pub struct GampState {
    /// Matrix image of `u`.
    pub u: DMatrix<f64>,
    pub v: DVector<f64>,
    pub onsager_b: f64,
    pub onsager_d: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct GampOutput {
    pub estimate: DMatrix<f64>,
    /// Eigenvalues of the estimate from the last shrinkage, decreasing.
    pub eigenvalues: Vec<f64>,
    pub trajectory: Vec<GampIterate>,
    pub state: GampState,
    pub converged: bool,
}

/// Damping used when an undamped run settles into a two-cycle.
pub const FALLBACK_DAMPING: f64 = 0.8;

/// [`gamp_run`] from zero, retried once with [`FALLBACK_DAMPING`] when the
/// first attempt does not converge.
pub fn gamp_solve(
    ds: &Dataset,
    params: &ModelParams,
    cfg: &GampConfig,
) -> Result<GampOutput, SimError> {
    let out = gamp_run(ds, params, cfg, GampInit::Zero)?;
    if out.converged || cfg.damping <= FALLBACK_DAMPING {
        return Ok(out);
    }
    let damped = GampConfig {
        damping: FALLBACK_DAMPING,
        max_iter: cfg.max_iter.max(1000),
        ..*cfg
    };
    gamp_run(ds, params, &damped, GampInit::Zero)
}

pub fn gamp_run(
    ds: &Dataset,
    params: &ModelParams,
    cfg: &GampConfig,
    init: GampInit,
) -> Result<GampOutput, SimError> {
    let lt = params.reduced_lambda();
    let tau = params.tau;
    if !(lt > 0.0 || tau > 0.0) {
        return Err(SimError::config("lambda", "GAMP needs λ > 0 or τ > 0"));
    }
    let d = ds.dim();
    let n = ds.samples();
    let big_d = ds.index().len() as f64;
    let row_scale = 1.0 / ((d + 1) as f64).sqrt();
    let up = (d as f64 / 2.0).sqrt();
    let channel = OutputChannel::for_dim(d);
    let ratio = n as f64 / big_d;
    let y = &ds.labels;
    let target = &ds.target;

    let mut g_prev = DVector::zeros(n);
    let mut u;
    let mut k;
    let mut b;
    let mut e;
    match init {
        GampInit::Zero => {
            e = DMatrix::zeros(d, d);
            b = cfg.initial_width;
            k = 0.0;
            u = DMatrix::zeros(d, d);
        }
        GampInit::FixedPoint { state, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // A GOE matrix scaled by sqrt(d/2) has vec entries N(0, 1).
            let z = sample_goe(&mut rng, d) * up;
            u = target * (up * state.m_hat) + z * state.q_hat.sqrt();
            k = state.sigma_hat;
            let s = spectral_denoise_matrix(&u, k, lt, tau)?;
            e = s.matrix;
            b = s.divergence / big_d;
        }
    }
    let mut v = DVector::zeros(n);
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut prev_estimate = &e / up;
    let mut eigenvalues = Vec::new();

    for t in 0..cfg.max_iter {
        v = ds.forward(&e) * row_scale - &g_prev * b;
        let g = DVector::from_fn(n, |i, _| channel.denoise(v[i], y[i], b));
        k = ratio * channel.slope(b);
        let fresh = ds.adjoint(&g) * row_scale + &e * k;
        u = if cfg.damping < 1.0 && t > 0 {
            fresh * cfg.damping + &u * (1.0 - cfg.damping)
        } else {
            fresh
        };
        g_prev = g;

        let s = spectral_denoise_matrix(&u, k, lt, tau)?;
        e = s.matrix;
        b = s.divergence / big_d;
        eigenvalues = s.eigenvalues.iter().map(|x| x / up).collect();
        let estimate = &e / up;
        let norm = estimate.norm();
        if !norm.is_finite() || norm > cfg.blowup * (d as f64).sqrt() || !b.is_finite() {
            return Err(SimError::Diverged { iteration: t });
        }
        let change = (&estimate - &prev_estimate).norm() / norm.max(f64::MIN_POSITIVE);
        trajectory.push(GampIterate {
            m: estimate.dot(target) / d as f64,
            q: norm * norm / d as f64,
            onsager_b: b,
            onsager_d: k,
            change,
        });
        prev_estimate = estimate;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    let iteration = trajectory.len();
    Ok(GampOutput {
        estimate: prev_estimate,
        eigenvalues,
        trajectory,
        state: GampState {
            u,
            v,
            onsager_b: b,
            onsager_d: k,
            iteration,
        },
        converged,
    })
}
