//! Observables of a finite-size estimate.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::SimError;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_CUTOFF: f64 = 1e-8;

/// `(1/d) ‖Ŝ − S*‖²_F`.
pub fn test_error(estimate: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    (estimate - target).norm_squared() / target.nrows() as f64
}

/// Eigenvalues of a symmetric estimate, decreasing. Vanishing eigenvalues
/// come back at round-off level; solvers that know their spectrum exactly
/// report it directly.
pub fn eigenvalues(estimate: &DMatrix<f64>) -> Result<Vec<f64>, SimError> {
    let ev = estimate.clone().symmetric_eigenvalues();
    if ev.iter().any(|x| !x.is_finite()) {
        return Err(SimError::Eigen);
    }
    let mut ev: Vec<f64> = ev.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// `sqrt(max(eig(Ŝ), 0))`: the singular values of `Ŵ / (m d)^{1/4}` for any
/// factorisation `Ŝ = ŴᵀŴ/sqrt(m d)`.
pub fn singular_values(eigenvalues: &[f64]) -> Vec<f64> {
    eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect()
}

/// Fraction of singular values below [`RANK_CUTOFF`] times the largest.
pub fn zero_fraction(sv: &[f64]) -> f64 {
    let top = sv.iter().fold(0.0f64, |a, &x| a.max(x));
    if sv.is_empty() {
        return 0.0;
    }
    if top == 0.0 {
        return 1.0;
    }
    sv.iter().filter(|&&x| x < RANK_CUTOFF * top).count() as f64 / sv.len() as f64
}

pub fn numerical_rank(sv: &[f64]) -> usize {
    sv.len() - (zero_fraction(sv) * sv.len() as f64).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Counts normalised by the total sample size and bin width.
    pub density: Vec<f64>,
}

/// Density histogram of `values` on `bins` equal bins over `[lo, hi]`.
/// Values outside the range are counted in the normalisation only.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v <= hi && width > 0.0 {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
    }
    let total = values.len().max(1) as f64;
    Histogram {
        edges,
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: FnMut(f64) -> f64>(sample: &[f64], mut cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalObservables {
    pub test_error: f64,
    pub zero_fraction: f64,
    pub singular_values: Vec<f64>,
}

/// Observables of `Ŝ` given its eigenvalues.
pub fn empirical_observables(
    estimate: &DMatrix<f64>,
    eigenvalues: &[f64],
    target: &DMatrix<f64>,
) -> Result<EmpiricalObservables, SimError> {
    if estimate.shape() != target.shape() {
        return Err(SimError::Shape {
            expected: target.len(),
            found: estimate.len(),
        });
    }
    let sv = singular_values(eigenvalues);
    Ok(EmpiricalObservables {
        test_error: test_error(estimate, target),
        zero_fraction: zero_fraction(&sv),
        singular_values: sv,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
