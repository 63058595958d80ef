//! Accelerated proximal gradient for
//!
//! ```text
//! F(S) = Σ_μ (y_μ − Tr[X^μ S])² + d λ̃ Tr S + (d τ/2) ‖S‖²_F,   S ⪰ 0.
//! ```
//!
//! The smooth part is the data fit plus the Frobenius term. The prox of
//! `t d λ̃ Tr(·)` plus the PSD indicator soft-thresholds the eigenvalues at
//! `t d λ̃` and clips them at zero.

use nalgebra::{DMatrix, DVector};
use quadnet_core::ModelParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{sample_goe, Dataset};
use crate::denoise::shrink_spectrum;
use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxConfig {
    pub max_iter: usize,
    /// Stop once the relative objective decrease stays below this for
    /// [`QUIET_STEPS`] consecutive iterations.
    pub tol: f64,
    pub power_iters: usize,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-12,
            power_iters: 40,
        }
    }
}

pub const QUIET_STEPS: usize = 5;

#[derive(Debug, Clone)]
pub struct ProxOutput {
    pub estimate: DMatrix<f64>,
    /// Eigenvalues of the estimate as produced by the final shrinkage,
    /// decreasing, with exact zeros.
    pub eigenvalues: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub lipschitz: f64,
}

/// Smooth and nonsmooth parts of the objective.
struct Problem<'a> {
    ds: &'a Dataset,
    trace_weight: f64,
    frob_weight: f64,
}

impl Problem<'_> {
    fn smooth(&self, s: &DMatrix<f64>, residual: &DVector<f64>) -> f64 {
        residual.norm_squared() + 0.5 * self.frob_weight * s.norm_squared()
    }

    fn full(&self, s: &DMatrix<f64>, residual: &DVector<f64>) -> f64 {
        self.smooth(s, residual) + self.trace_weight * s.trace()
    }

    fn gradient(&self, s: &DMatrix<f64>, residual: &DVector<f64>) -> DMatrix<f64> {
        self.ds.adjoint(residual) * 2.0 + s * self.frob_weight
    }
}

/// `F(S)` as defined in the module documentation.
pub fn objective(ds: &Dataset, params: &ModelParams, s: &DMatrix<f64>) -> f64 {
    let p = problem(ds, params);
    let r = ds.forward(s) - &ds.labels;
    p.full(s, &r)
}

fn problem<'a>(ds: &'a Dataset, params: &ModelParams) -> Problem<'a> {
    let d = ds.dim() as f64;
    Problem {
        ds,
        trace_weight: d * params.reduced_lambda(),
        frob_weight: d * params.tau,
    }
}

/// Largest eigenvalue of `𝒜*𝒜` by power iteration from a fixed start.
pub fn operator_norm_sq(ds: &Dataset, iters: usize) -> f64 {
    if ds.samples() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut m = sample_goe(&mut rng, ds.dim());
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        let next = ds.adjoint(&ds.forward(&m));
        est = next.dot(&m);
        m = next;
    }
    est
}

pub fn prox_gradient_solve(
    ds: &Dataset,
    params: &ModelParams,
    cfg: &ProxConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<ProxOutput, SimError> {
    let d = ds.dim();
    let p = problem(ds, params);
    let y = &ds.labels;
    // Power iteration underestimates; the margin keeps most steps accepted.
    let mut lip = (2.0 * operator_norm_sq(ds, cfg.power_iters) * 1.02 + p.frob_weight)
        .max(f64::MIN_POSITIVE.sqrt());

    let mut s = match init {
        Some(s0) => shrink_spectrum(s0, 0.0, 1.0)?.matrix,
        None => DMatrix::zeros(d, d),
    };
    let mut fs = ds.forward(&s);
    let mut obj = p.full(&s, &(&fs - y));
    let mut y_mat = s.clone();
    let mut fy = fs.clone();
    let mut t = 1.0f64;
    let mut quiet = 0;
    let mut decrease = f64::NAN;

    for it in 1..=cfg.max_iter {
        let ry = &fy - y;
        let grad = p.gradient(&y_mat, &ry);
        let smooth_y = p.smooth(&y_mat, &ry);
        let (next, f_next, spectrum) = loop {
            let step = 1.0 / lip;
            let shrunk = shrink_spectrum(&(&y_mat - &grad * step), step * p.trace_weight, 1.0)?;
            let cand = shrunk.matrix;
            let f_cand = ds.forward(&cand);
            let diff = &cand - &y_mat;
            let bound = smooth_y + grad.dot(&diff) + 0.5 * lip * diff.norm_squared();
            let actual = p.smooth(&cand, &(&f_cand - y));
            if actual <= bound + 1e-12 * bound.abs().max(1.0) {
                break (cand, f_cand, shrunk.eigenvalues);
            }
            lip *= 2.0;
        };
        let obj_next = p.full(&next, &(&f_next - y));
        if !obj_next.is_finite() {
            return Err(SimError::Diverged { iteration: it });
        }

        // Restart the momentum whenever it points uphill.
        let restart = (&y_mat - &next).dot(&(&next - &s)) > 0.0;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let beta = if restart { 0.0 } else { (t - 1.0) / t_next };
        y_mat = &next + (&next - &s) * beta;
        fy = &f_next + (&f_next - &fs) * beta;
        t = t_next;

        decrease = (obj - obj_next) / obj_next.abs().max(f64::MIN_POSITIVE);
        let eigenvalues = spectrum;
        s = next;
        fs = f_next;
        obj = obj_next;
        if decrease.abs() < cfg.tol {
            quiet += 1;
            if quiet >= QUIET_STEPS {
                return Ok(ProxOutput {
                    estimate: s,
                    eigenvalues,
                    objective: obj,
                    iterations: it,
                    lipschitz: lip,
                });
            }
        } else {
            quiet = 0;
        }
    }
    Err(SimError::NotConverged {
        iterations: cfg.max_iter,
        change: decrease,
    })
}
