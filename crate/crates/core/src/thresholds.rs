//! Phase thresholds and the small-rank closed forms.
//!
//! * Interpolation threshold `α_inter(κ*, Δ)`: below it the minimal-norm
//!   interpolator exists; above it the unregularized minimizer has positive
//!   training loss.
//! * Perfect-recovery threshold `α_strong(κ*)` for noiseless data.
//! * Small-rank limit `κ* → 0` with `α = ᾱ κ*`, `λ̃ = λ̄ sqrt(κ*)`.

use alloc::vec::Vec;

use crate::integrals::{IntegralError, JEvaluator, SMALL_WIDTH};
use crate::math::{powi, sqrt};
use crate::roots::{bisect, RootError};
use crate::semicircle::{m0, m1, m2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    Interpolation,
    StrongRecovery,
    WeakRecoverySmallRank,
}

/// A threshold value. `aux` carries the auxiliary root of the defining
/// equation (`δ̄` for interpolation, `c̄` for perfect recovery) when there is
/// one, `NaN` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub kind: ThresholdKind,
    pub alpha: f64,
    pub aux: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ThresholdError {
    #[error("argument `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Integral(#[from] IntegralError),
    #[error(transparent)]
    Root(#[from] RootError),
}

fn check(name: &'static str, value: f64, allow_zero: bool) -> Result<(), ThresholdError> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(())
    } else {
        Err(ThresholdError::OutOfRange { name, value })
    }
}

/// Noiseless interpolation threshold: `(1 + 2κ* - κ*²)/4` for `κ* < 1`,
/// `1/2` otherwise.
pub fn interpolation_threshold_noiseless(kappa_star: f64) -> f64 {
    if kappa_star < 1.0 {
        (1.0 + 2.0 * kappa_star - kappa_star * kappa_star) / 4.0
    } else {
        0.5
    }
}

/// Interpolation threshold. For `Δ > 0` solves
/// `Q* + Δ/2 = J(δ, 0) - (δ/2) ∂_a J(δ, 0)` for `δ̄` and returns
/// `α = ∂_a J(δ̄, 0) / (4 δ̄)`.
pub fn interpolation_threshold(
    kappa_star: f64,
    noise: f64,
    ev: &mut JEvaluator,
) -> Result<ThresholdResult, ThresholdError> {
    check("kappa_star", kappa_star, false)?;
    check("noise", noise, true)?;
    if noise == 0.0 {
        return Ok(ThresholdResult {
            kind: ThresholdKind::Interpolation,
            alpha: interpolation_threshold_noiseless(kappa_star),
            aux: 0.0,
            residual: 0.0,
        });
    }
    let target = 1.0 + kappa_star + noise / 2.0;
    let mut f = |delta: f64| -> Result<f64, IntegralError> {
        let p = ev.partials(delta, 0.0)?;
        Ok(p.value - 0.5 * delta * p.d_a - target)
    };
    let lo = SMALL_WIDTH;
    let mut hi = 1.0;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(RootError::NoBracket {
                lo,
                hi,
                f_lo: f(lo)?,
                f_hi: f(hi)?,
            }
            .into());
        }
    }
    let delta = bisect(&mut f, lo, hi, 1e-13 * hi)??;
    let residual = f(delta)?.abs() / target;
    let p = ev.partials(delta, 0.0)?;
    Ok(ThresholdResult {
        kind: ThresholdKind::Interpolation,
        alpha: p.d_a_over_a / 4.0,
        aux: delta,
        residual,
    })
}

/// Perfect-recovery threshold for noiseless data. For `κ* < 1`, `c̄ ∈ (0, 2)`
/// solves `c = (1 - κ*)(c M_0(c) - M_1(c))` and
/// `α = 1/2 - (1 - κ*)² (M_2(c̄) - c̄ M_1(c̄)) / 2`.
pub fn strong_recovery_threshold(kappa_star: f64) -> Result<ThresholdResult, ThresholdError> {
    check("kappa_star", kappa_star, false)?;
    if kappa_star >= 1.0 {
        return Ok(ThresholdResult {
            kind: ThresholdKind::StrongRecovery,
            alpha: 0.5,
            aux: f64::NAN,
            residual: 0.0,
        });
    }
    let w = 1.0 - kappa_star;
    let g = |c: f64| w * (c * m0(c) - m1(c)) - c;
    let c = bisect::<(), _>(|c| Ok(g(c)), 0.0, 2.0, 1e-15).unwrap_or(Ok(f64::NAN))?;
    let alpha = 0.5 - 0.5 * w * w * (m2(c) - c * m1(c));
    Ok(ThresholdResult {
        kind: ThresholdKind::StrongRecovery,
        alpha,
        aux: c,
        residual: g(c).abs(),
    })
}

/// Weak-recovery threshold `ᾱ_weak` in the small-rank limit.
pub fn weak_recovery_small_rank(lambda_bar: f64, noise: f64) -> ThresholdResult {
    let a = (1.0 + noise / 2.0) / 2.0;
    let b = (lambda_bar - 2.0 * (1.0 + noise / 2.0)) / 4.0;
    ThresholdResult {
        kind: ThresholdKind::WeakRecoverySmallRank,
        alpha: a.max(b),
        aux: f64::NAN,
        residual: 0.0,
    }
}

/// Small-rank test error of the `λ̄ → 0⁺` noiseless estimator:
/// `1` up to `ᾱ = 1/2`, `(2/9) ᾱ (4 - sqrt(6ᾱ - 2))²` up to `ᾱ = 3`, then `0`.
pub fn small_rank_noiseless_error(alpha_bar: f64) -> f64 {
    if alpha_bar <= 0.5 {
        1.0
    } else if alpha_bar <= 3.0 {
        let t = 4.0 - sqrt(6.0 * alpha_bar - 2.0);
        2.0 / 9.0 * alpha_bar * t * t
    } else {
        0.0
    }
}

/// Which part of the rescaled spectrum lies above the eigenvalue threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallRankCase {
    /// Nothing survives the threshold.
    Null,
    /// The threshold sits at the semicircle edge; no outlier.
    BulkEdge,
    /// Only the outlier survives.
    Spike,
    /// The threshold sits at the semicircle edge and the outlier survives.
    SpikeAndBulk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallRankSolution {
    pub test_error: f64,
    pub case: SmallRankCase,
    /// Rescaled width `δ / sqrt(κ*)`.
    pub width: f64,
    /// Rescaled threshold `λ̃ε / sqrt(κ*)`.
    pub threshold: f64,
    /// More than one case was admissible; the smaller error was kept.
    pub ambiguous: bool,
}

const SLACK: f64 = 1e-10;

/// Test error in the small-rank limit for general `(ᾱ, λ̄, Δ)`.
pub fn small_rank_test_error(
    alpha_bar: f64,
    lambda_bar: f64,
    noise: f64,
) -> Result<SmallRankSolution, ThresholdError> {
    check("alpha_bar", alpha_bar, false)?;
    check("lambda_bar", lambda_bar, true)?;
    check("noise", noise, true)?;
    if lambda_bar == 0.0 && noise == 0.0 {
        let e = small_rank_noiseless_error(alpha_bar);
        let (case, width) = if alpha_bar <= 0.5 {
            (SmallRankCase::BulkEdge, sqrt(0.5 / alpha_bar))
        } else if alpha_bar <= 3.0 {
            (
                SmallRankCase::SpikeAndBulk,
                (4.0 - sqrt(6.0 * alpha_bar - 2.0)) / 3.0,
            )
        } else {
            (SmallRankCase::SpikeAndBulk, 0.0)
        };
        return Ok(SmallRankSolution {
            test_error: e,
            case,
            width,
            threshold: 2.0 * width,
            ambiguous: false,
        });
    }
    let a = alpha_bar;
    let l = lambda_bar;
    let h = 1.0 + noise / 2.0;
    let err = |d: f64| 2.0 * a * d * d - noise / 2.0;
    let mut found: Vec<SmallRankSolution> = Vec::new();

    // No outlier contribution: δ² = (1 + Δ/2) / (2ᾱ).
    let d = sqrt(h / (2.0 * a));
    let c = l / (4.0 * a);
    let t = 4.0 * a * d - l / 2.0;
    let null_ok = if d >= 1.0 { c >= 2.0 * d - SLACK } else { c >= 1.0 + d * d - SLACK };
    if null_ok {
        found.push(solution(err(d), SmallRankCase::Null, d, c));
    } else if d >= 1.0 && t > SLACK {
        found.push(solution(err(d), SmallRankCase::BulkEdge, d, 2.0 * d));
    }

    // Outlier only: u = 1 + δ² - c = ᾱ - λ̄/(4c) and the second equation in c.
    let lower = (l / (4.0 * a)).max(1e-12);
    let g = |c: f64| {
        let u = a - l / (4.0 * c);
        let d2 = u + c - 1.0;
        1.0 + 2.0 * a * d2 + noise / 2.0 - l * d2 / c - u * u - 2.0 * c * u
    };
    let steps = 4000;
    let mut prev_c = lower;
    let mut prev_g = g(prev_c);
    for i in 1..=steps {
        let cc = lower + (2.0 - lower) * i as f64 / steps as f64;
        let gc = g(cc);
        if prev_g.signum() != gc.signum() && prev_g.is_finite() && gc.is_finite() {
            if let Ok(Ok(root)) = bisect::<(), _>(|x| Ok(g(x)), prev_c, cc, 1e-15) {
                let u = a - l / (4.0 * root);
                let d2 = u + root - 1.0;
                if d2 > SLACK && d2 < 1.0 - SLACK && u > SLACK && root > 2.0 * sqrt(d2) + SLACK {
                    found.push(solution(err(sqrt(d2)), SmallRankCase::Spike, sqrt(d2), root));
                }
            }
        }
        prev_c = cc;
        prev_g = gc;
    }

    // Outlier and bulk edge: 1 + Δ/2 - 2ᾱδ² = (1 - δ)³ (1 + 3δ), c = 2δ.
    let f = |d: f64| h - 2.0 * a * d * d - powi(1.0 - d, 3) * (1.0 + 3.0 * d);
    let start = (1.0 - sqrt(a / 3.0)).max(0.0);
    if f(1.0) < 0.0 {
        let lo = if start > 0.0 { start } else { 0.0 };
        if f(lo) > 0.0 {
            if let Ok(Ok(d)) = bisect::<(), _>(|x| Ok(f(x)), lo, 1.0, 1e-15) {
                let t = 4.0 * a * d - l / 2.0 - 4.0 * d * (1.0 - d) * (1.0 - d);
                if t > SLACK && d > 0.0 {
                    found.push(solution(err(d), SmallRankCase::SpikeAndBulk, d, 2.0 * d));
                }
            }
        }
    }

    let ambiguous = found.len() > 1;
    let best = found
        .into_iter()
        .min_by(|x, y| x.test_error.total_cmp(&y.test_error))
        .ok_or(RootError::NoBracket {
            lo: 0.0,
            hi: 2.0,
            f_lo: f64::NAN,
            f_hi: f64::NAN,
        })?;
    Ok(SmallRankSolution { ambiguous, ..best })
}

fn solution(test_error: f64, case: SmallRankCase, width: f64, threshold: f64) -> SmallRankSolution {
    SmallRankSolution {
        test_error,
        case,
        width,
        threshold,
        ambiguous: false,
    }
}

/// Leading large-`ᾱ` behaviour `3Δ / (2ᾱ)` of the small-rank test error.
pub fn small_rank_large_alpha(alpha_bar: f64, noise: f64) -> f64 {
    1.5 * noise / alpha_bar
}
