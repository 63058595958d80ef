//! State evolution of the spectral GAMP iteration and its fixed points.
//!
//! Order parameters: overlap `m`, self-overlap `q`, response `Σ`, and the
//! conjugates `m̂`, `q̂`, `Σ̂`. One synchronous step reads
//!
//! ```text
//! Σ̂ = m̂ = 2α / (Σ + 1/4),    q̂ = 2α (Q* - 2m + q + Δ/2) / (Σ + 1/4)²
//! m  = [m̂ J - (sqrt(q̂)/2) ∂_a J - λ̃ ∂_b J] / (Σ̂ + 2τ)
//! q  = m̂² J / (Σ̂ + 2τ)²
//! Σ  = m̂ ∂_a J / (2 sqrt(q̂) (Σ̂ + 2τ))
//! ```
//!
//! with `J` and its partials evaluated at `(sqrt(q̂)/m̂, 2λ̃/m̂)`.
//!
//! The `λ̃ → 0⁺` limit below the interpolation threshold has `Σ → ∞`; it is
//! handled by [`Branch::Interpolator`], in which `Σ` and the conjugates are
//! measured in units of `λ̃` (so `Σ + 1/4` becomes `Σ` and the threshold
//! `2λ̃/m̂` becomes `2/m̂`).

use crate::integrals::{IntegralError, JEvaluator};
use crate::math::sqrt;
use crate::params::{ModelParams, ParamError};
use crate::thresholds::{interpolation_threshold, strong_recovery_threshold, ThresholdError};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeState {
    pub m: f64,
    pub q: f64,
    pub sigma: f64,
    pub m_hat: f64,
    pub q_hat: f64,
    pub sigma_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Finite regularization (`λ̃ = 0` allowed above the interpolation
    /// threshold).
    Regularized,
    /// Vanishing regularization below the interpolation threshold, in
    /// rescaled variables.
    Interpolator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Initial damping `γ` in `s ← (1 - γ) s + γ F(s)`.
    pub damping: f64,
    /// Damping is halved on oscillation, down to this floor.
    pub min_damping: f64,
    /// Tolerance on the distance between `s` and `F(s)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Anderson mixing depth; 0 gives the plain damped iteration.
    pub memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            min_damping: 1e-2,
            tol: 1e-10,
            max_iter: 20_000,
            memory: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SeError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("`{quantity}` left its domain: {value}")]
    Domain { quantity: &'static str, value: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        state: SeState,
    },
    #[error(transparent)]
    Integral(#[from] IntegralError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

/// Converged fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub state: SeState,
    pub branch: Branch,
    /// `δ̄ = sqrt(q̂)/m̂`, width of the noise added to `S*`.
    pub width: f64,
    /// `λ̃ ε̄`, the eigenvalue threshold of the estimator.
    pub threshold: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl FixedPoint {
    /// `ε̄ = 2/m̂`; infinite on the interpolator branch.
    pub fn eps_bar(&self) -> f64 {
        match self.branch {
            Branch::Regularized => 2.0 / self.state.m_hat,
            Branch::Interpolator => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Channel {
    alpha: f64,
    q_star: f64,
    noise: f64,
    offset: f64,
    lambda: f64,
    tau: f64,
}

impl Channel {
    fn new(p: &ModelParams, branch: Branch) -> Self {
        let (offset, lambda, tau) = match branch {
            Branch::Regularized => (0.25, p.reduced_lambda(), p.tau),
            Branch::Interpolator => (0.0, 1.0, 0.0),
        };
        Self {
            alpha: p.alpha,
            q_star: p.target_second_moment(),
            noise: p.noise,
            offset,
            lambda,
            tau,
        }
    }

    fn hats(&self, m: f64, q: f64, sigma: f64) -> Result<(f64, f64), SeError> {
        let denom = sigma + self.offset;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(SeError::Domain {
                quantity: "sigma",
                value: sigma,
            });
        }
        let mut mse = self.q_star - 2.0 * m + q + self.noise / 2.0;
        if mse < -1e-10 * self.q_star {
            return Err(SeError::Domain {
                quantity: "q_hat",
                value: mse,
            });
        }
        mse = mse.max(0.0);
        let m_hat = 2.0 * self.alpha / denom;
        let q_hat = 2.0 * self.alpha * mse / (denom * denom);
        Ok((m_hat, q_hat))
    }

    fn width_threshold(&self, m_hat: f64, q_hat: f64) -> (f64, f64) {
        (sqrt(q_hat) / m_hat, 2.0 * self.lambda / m_hat)
    }

    fn step(&self, s: &SeState, ev: &mut JEvaluator) -> Result<SeState, SeError> {
        let (m_hat, q_hat) = self.hats(s.m, s.q, s.sigma)?;
        let (width, threshold) = self.width_threshold(m_hat, q_hat);
        let j = ev.partials(width, threshold)?;
        let k = m_hat + 2.0 * self.tau;
        let m = (m_hat * j.value - 0.5 * m_hat * width * width * j.d_a_over_a - self.lambda * j.d_b) / k;
        let q = m_hat * m_hat * j.value / (k * k);
        let sigma = j.d_a_over_a / (2.0 * k);
        if !(m.is_finite() && q.is_finite() && sigma.is_finite()) {
            return Err(SeError::Domain {
                quantity: "state",
                value: f64::NAN,
            });
        }
        Ok(SeState {
            m,
            q,
            sigma,
            m_hat,
            q_hat,
            sigma_hat: m_hat,
        })
    }

    fn initial(&self) -> Result<SeState, SeError> {
        let m = self.q_star / 2.0;
        let q = self.q_star / 2.0;
        let sigma = 1.0;
        let (m_hat, q_hat) = self.hats(m, q, sigma)?;
        Ok(SeState {
            m,
            q,
            sigma,
            m_hat,
            q_hat,
            sigma_hat: m_hat,
        })
    }
}

/// One synchronous update of all six equations.
pub fn se_step(
    params: &ModelParams,
    branch: Branch,
    state: &SeState,
    ev: &mut JEvaluator,
) -> Result<SeState, SeError> {
    params.validate()?;
    Channel::new(params, branch).step(state, ev)
}

const STALL_WINDOW: usize = 25;
const MAX_MEMORY: usize = 6;

/// Anderson mixing on `(m, q, Σ)`.
struct Mixer {
    depth: usize,
    last: Option<([f64; 3], [f64; 3])>,
    dx: Vec<[f64; 3]>,
    dg: Vec<[f64; 3]>,
}

impl Mixer {
    fn new(depth: usize) -> Self {
        Self {
            depth: depth.min(MAX_MEMORY),
            last: None,
            dx: Vec::new(),
            dg: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    fn clear(&mut self) {
        self.last = None;
        self.dx.clear();
        self.dg.clear();
    }

    /// Next iterate from the current point `x` and its update `g = F(x) - x`.
    fn advance(&mut self, x: [f64; 3], g: [f64; 3], beta: f64) -> [f64; 3] {
        let plain = [x[0] + beta * g[0], x[1] + beta * g[1], x[2] + beta * g[2]];
        if self.depth == 0 {
            return plain;
        }
        if let Some((px, pg)) = self.last {
            if self.dx.len() == self.depth {
                self.dx.remove(0);
                self.dg.remove(0);
            }
            self.dx.push(sub(x, px));
            self.dg.push(sub(g, pg));
        }
        self.last = Some((x, g));
        let k = self.dg.len();
        if k == 0 {
            return plain;
        }
        let mut gram = [[0.0; MAX_MEMORY]; MAX_MEMORY];
        let mut rhs = [0.0; MAX_MEMORY];
        let mut trace = 0.0;
        for i in 0..k {
            for j in 0..k {
                gram[i][j] = dot(self.dg[i], self.dg[j]);
            }
            rhs[i] = dot(self.dg[i], g);
            trace += gram[i][i];
        }
        for (i, row) in gram.iter_mut().enumerate().take(k) {
            row[i] += 1e-10 * trace + 1e-300;
        }
        let Some(coef) = solve_small(&mut gram, &mut rhs, k) else {
            self.clear();
            return plain;
        };
        let mut out = plain;
        for i in 0..k {
            if !coef[i].is_finite() || coef[i].abs() > 1e6 {
                self.clear();
                return plain;
            }
            for d in 0..3 {
                out[d] -= coef[i] * (self.dx[i][d] + beta * self.dg[i][d]);
            }
        }
        // Σ = 0 and Σ = ∞ both attract near the interpolation threshold;
        // keep extrapolated steps in Σ within a factor 2 of the plain one.
        if out[1] < 0.0 || out[2] < 0.5 * plain[2] || out[2] > 2.0 * plain[2] {
            self.clear();
            return plain;
        }
        out
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Gaussian elimination with partial pivoting on the leading `n × n` block.
fn solve_small(
    a: &mut [[f64; MAX_MEMORY]; MAX_MEMORY],
    b: &mut [f64; MAX_MEMORY],
    n: usize,
) -> Option<[f64; MAX_MEMORY]> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; MAX_MEMORY];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn distance(a: &SeState, b: &SeState) -> f64 {
    let ds = (a.sigma - b.sigma) / (1.0 + a.sigma.abs());
    sqrt((a.m - b.m) * (a.m - b.m) + (a.q - b.q) * (a.q - b.q) + ds * ds)
}

/// Damped fixed-point iteration on a given branch, with Anderson mixing.
/// A failed accelerated run is repeated without mixing.
pub fn solve_branch(
    params: &ModelParams,
    branch: Branch,
    init: Option<SeState>,
    cfg: &SolverConfig,
    ev: &mut JEvaluator,
) -> Result<FixedPoint, SeError> {
    match iterate(params, branch, init, cfg, ev) {
        Err(_) if cfg.memory > 0 => {
            let plain = SolverConfig { memory: 0, ..*cfg };
            iterate(params, branch, init, &plain, ev)
        }
        r => r,
    }
}

fn iterate(
    params: &ModelParams,
    branch: Branch,
    init: Option<SeState>,
    cfg: &SolverConfig,
    ev: &mut JEvaluator,
) -> Result<FixedPoint, SeError> {
    params.validate()?;
    let ch = Channel::new(params, branch);
    let mut s = match init {
        Some(s) => s,
        None => ch.initial()?,
    };
    let mut gamma = cfg.damping.clamp(cfg.min_damping, 1.0);
    let mut prev = f64::INFINITY;
    let mut best = f64::INFINITY;
    let (mut window, mut flat) = (0, 0);
    let mut residual = f64::INFINITY;
    let mut mixer = Mixer::new(cfg.memory);
    let mut safe = s;
    for it in 1..=cfg.max_iter {
        let next = match ch.step(&s, ev) {
            Ok(next) => next,
            Err(_) if !mixer.is_empty() => {
                // An extrapolated point left the domain; restart plainly.
                mixer.clear();
                s = safe;
                ch.step(&s, ev)?
            }
            Err(e) => return Err(e),
        };
        residual = distance(&s, &next);
        if residual < cfg.tol {
            let (m_hat, q_hat) = ch.hats(next.m, next.q, next.sigma)?;
            let (width, threshold) = ch.width_threshold(m_hat, q_hat);
            return Ok(FixedPoint {
                state: SeState {
                    m_hat,
                    q_hat,
                    sigma_hat: m_hat,
                    ..next
                },
                branch,
                width,
                threshold,
                iterations: it,
                residual,
            });
        }
        if residual > 4.0 * best {
            mixer.clear();
        }
        best = best.min(residual);
        safe = SeState {
            m: (1.0 - gamma) * s.m + gamma * next.m,
            q: (1.0 - gamma) * s.q + gamma * next.q,
            sigma: (1.0 - gamma) * s.sigma + gamma * next.sigma,
            ..next
        };
        let x = [s.m, s.q, s.sigma];
        let g = [next.m - s.m, next.q - s.q, next.sigma - s.sigma];
        let [m, q, sigma] = mixer.advance(x, g, gamma);
        s = SeState { m, q, sigma, ..next };
        // Oscillation shows up as a residual that stops decreasing.
        if residual >= prev * (1.0 - 1e-6) {
            flat += 1;
        }
        prev = residual;
        window += 1;
        if window == STALL_WINDOW {
            if 3 * flat >= STALL_WINDOW {
                gamma = (0.5 * gamma).max(cfg.min_damping);
                mixer.clear();
            }
            window = 0;
            flat = 0;
        }
    }
    Err(SeError::NotConverged {
        iterations: cfg.max_iter,
        residual,
        state: s,
    })
}

/// Fixed point at finite regularization.
pub fn solve_fixed_point(
    params: &ModelParams,
    init: Option<SeState>,
    cfg: &SolverConfig,
    ev: &mut JEvaluator,
) -> Result<FixedPoint, SeError> {
    solve_branch(params, Branch::Regularized, init, cfg, ev)
}

/// Branch and parameters describing the `λ → 0⁺` estimator at `params.alpha`.
/// `alpha_inter` is the interpolation threshold for `params.noise`.
pub fn interpolator_branch(params: &ModelParams, alpha_inter: f64) -> (Branch, ModelParams) {
    let mut p = *params;
    p.tau = 0.0;
    if params.noise == 0.0 || params.alpha < alpha_inter {
        (Branch::Interpolator, p)
    } else {
        p.lambda = 0.0;
        (Branch::Regularized, p)
    }
}

/// Fixed point of the `λ → 0⁺` limit: the minimal-nuclear-norm interpolator
/// below the interpolation threshold, the unregularized minimizer above it.
pub fn solve_interpolator_limit(
    params: &ModelParams,
    init: Option<SeState>,
    cfg: &SolverConfig,
    ev: &mut JEvaluator,
) -> Result<FixedPoint, SeError> {
    params.validate()?;
    let alpha_inter = interpolation_threshold(params.kappa_star, params.noise, ev)?.alpha;
    let (branch, p) = interpolator_branch(params, alpha_inter);
    solve_branch(&p, branch, init, cfg, ev)
}

/// Observables of a fixed point, all normalised per `d²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// `(1/d) ‖Ŝ - S*‖²_F`, equal to half the excess test risk.
    pub test_error: f64,
    pub train_loss: f64,
    /// Fraction of vanishing eigenvalues of `Ŝ`.
    pub zero_mass: f64,
    /// `2α` minus the stability integral; positive when the fixed point is
    /// stable.
    pub replicon_margin: f64,
}

pub fn observables(
    params: &ModelParams,
    fp: &FixedPoint,
    ev: &mut JEvaluator,
) -> Result<Observables, SeError> {
    let s = &fp.state;
    let test_error = (params.target_second_moment() - 2.0 * s.m + s.q).max(0.0);
    let train_loss = match fp.branch {
        Branch::Interpolator => 0.0,
        Branch::Regularized => {
            let lambda = params.reduced_lambda();
            let j = ev.partials(fp.width, fp.threshold)?;
            s.q_hat / 16.0 - 0.5 * lambda * j.d_b
        }
    };
    let law = ev.law(fp.width).map_err(IntegralError::from)?;
    let zero_mass = law
        .cdf_with(ev.rules(), fp.threshold)
        .map_err(IntegralError::from)?
        .clamp(0.0, 1.0);
    let replicon = ev.replicon_integral(fp.width, fp.threshold)?;
    Ok(Observables {
        test_error,
        train_loss,
        zero_mass,
        replicon_margin: 2.0 * params.alpha - replicon,
    })
}

/// Density of the nonzero singular values `σ = sqrt(eig(Ŝ))`:
/// `2σ μ_δ̄(σ² + λ̃ε̄)` for `σ > 0`. The remaining mass sits at zero.
pub fn singular_value_density(fp: &FixedPoint, ev: &JEvaluator, x: f64) -> Result<f64, SeError> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let law = ev.law(fp.width).map_err(IntegralError::from)?;
    Ok(2.0 * x * law.density(x * x + fp.threshold))
}

/// Residuals of the reduced two-equation system in `(δ, ε)` at a
/// regularized fixed point with `τ = 0`, relative to the size of each side.
pub fn reduced_residuals(
    params: &ModelParams,
    fp: &FixedPoint,
    ev: &mut JEvaluator,
) -> Result<[f64; 2], SeError> {
    let a = params.alpha;
    let d = fp.width;
    let inv_eps = match fp.branch {
        Branch::Regularized => fp.state.m_hat / 2.0,
        Branch::Interpolator => 0.0,
    };
    let c = fp.threshold;
    let j = ev.partials(d, c)?;
    let q_star = params.target_second_moment();
    let lhs1 = 4.0 * a * d - d * inv_eps;
    let rhs1 = j.d_a;
    let lhs2 = q_star + params.noise / 2.0 + 2.0 * a * d * d - d * d * inv_eps;
    let rhs2 = j.value - c * j.d_b;
    let r1 = (lhs1 - rhs1).abs() / (lhs1.abs() + rhs1.abs()).max(1e-300);
    let r2 = (lhs2 - rhs2).abs() / (lhs2.abs() + rhs2.abs()).max(1e-300);
    Ok([r1, r2])
}

/// Whether a sweep uses finite regularization or the `λ → 0⁺` limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Regularized,
    Interpolator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub alpha: f64,
    pub fixed_point: FixedPoint,
    pub observables: Observables,
}

/// Solve along an `α` grid by continuation. The chain starts at the grid
/// point closest to `α_strong/2` and walks outward in both directions, each
/// solve initialised at its neighbour's fixed point.
pub fn sweep_alpha(
    params: &ModelParams,
    alphas: &[f64],
    mode: SweepMode,
    cfg: &SolverConfig,
    ev: &mut JEvaluator,
) -> Vec<Result<CurvePoint, SeError>> {
    let mut out: Vec<Option<Result<CurvePoint, SeError>>> = alphas.iter().map(|_| None).collect();
    if alphas.is_empty() {
        return Vec::new();
    }
    let alpha_inter = match mode {
        SweepMode::Interpolator => match interpolation_threshold(params.kappa_star, params.noise, ev) {
            Ok(t) => t.alpha,
            Err(e) => return alphas.iter().map(|_| Err(e.into())).collect(),
        },
        SweepMode::Regularized => f64::NAN,
    };
    let anchor = strong_recovery_threshold(params.kappa_star)
        .map(|t| t.alpha / 2.0)
        .unwrap_or(0.25);
    let start = alphas
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - anchor).abs().total_cmp(&(b.1 - anchor).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut solve_at = |i: usize, prev: Option<&FixedPoint>| -> Result<CurvePoint, SeError> {
        let p = params.with_alpha(alphas[i])?;
        let (branch, p) = match mode {
            SweepMode::Regularized => (Branch::Regularized, p),
            SweepMode::Interpolator => interpolator_branch(&p, alpha_inter),
        };
        let warm = prev.filter(|f| f.branch == branch).map(|f| f.state);
        let fp = match warm {
            Some(w) => solve_branch(&p, branch, Some(w), cfg, ev)
                .or_else(|_| solve_branch(&p, branch, None, cfg, ev))?,
            None => solve_branch(&p, branch, None, cfg, ev)?,
        };
        let observables = observables(&p, &fp, ev)?;
        Ok(CurvePoint {
            alpha: alphas[i],
            fixed_point: fp,
            observables,
        })
    };
    let first = solve_at(start, None);
    let mut last = first.as_ref().ok().map(|c| c.fixed_point);
    out[start] = Some(first);
    for i in start + 1..alphas.len() {
        let r = solve_at(i, last.as_ref());
        last = r.as_ref().ok().map(|c| c.fixed_point).or(last);
        out[i] = Some(r);
    }
    last = out[start].as_ref().and_then(|r| r.as_ref().ok()).map(|c| c.fixed_point);
    for i in (0..start).rev() {
        let r = solve_at(i, last.as_ref());
        last = r.as_ref().ok().map(|c| c.fixed_point).or(last);
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every grid point visited")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, ks: f64, lambda: f64, noise: f64) -> ModelParams {
        ModelParams::new(alpha, ks, 1.0, lambda, noise).unwrap()
    }

    #[test]
    fn regularized_fixed_point_solves_reduced_system() {
        let p = params(0.6, 0.5, 0.1, 0.5);
        let mut ev = JEvaluator::new(0.5).unwrap();
        let fp = solve_fixed_point(&p, None, &SolverConfig::default(), &mut ev).unwrap();
        let r = reduced_residuals(&p, &fp, &mut ev).unwrap();
        assert!(r[0] < 1e-6 && r[1] < 1e-6, "{r:?}");
        let o = observables(&p, &fp, &mut ev).unwrap();
        let alt = 2.0 * p.alpha * fp.width * fp.width - p.noise / 2.0;
        assert!((o.test_error - alt).abs() < 1e-7);
        assert!(o.replicon_margin > 0.0);
    }

    #[test]
    fn infinite_regularization_gives_null_estimator() {
        let p = params(0.6, 0.5, 1e6, 0.0);
        let mut ev = JEvaluator::new(0.5).unwrap();
        let fp = solve_fixed_point(&p, None, &SolverConfig::default(), &mut ev).unwrap();
        let o = observables(&p, &fp, &mut ev).unwrap();
        assert!((o.test_error - 1.5).abs() < 1e-6);
        assert!((o.zero_mass - 1.0).abs() < 1e-9);
    }
}
