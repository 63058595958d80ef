//! Output and input denoisers of GAMP for the square loss with a spectral
//! penalty.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::SimError;
use crate::vecmap::VecIndex;

/// `g(r, s, b) = (s − r)/(b + 1/4)`, the square-loss output denoiser in the
/// `d → ∞` normalisation.
pub fn output_denoiser(r: f64, s: f64, b: f64) -> f64 {
    (s - r) / (b + 0.25)
}

/// `ḡ(r, s, b) = (r + 4bs)/(1 + 4b)`, so that `g = (ḡ − r)/b`.
pub fn output_prox(r: f64, s: f64, b: f64) -> f64 {
    (r + 4.0 * b * s) / (1.0 + 4.0 * b)
}

/// Square-loss channel `(y − c a)²` on the vector pre-activation `a`.
///
/// With `c = √2` and `y = √2 s` this reduces to [`output_denoiser`]. At
/// finite `d` the exact factor is `c = sqrt(2(d+1)/d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputChannel {
    pub scale: f64,
}

impl OutputChannel {
    pub fn for_dim(dim: usize) -> Self {
        let d = dim as f64;
        Self {
            scale: (2.0 * (d + 1.0) / d).sqrt(),
        }
    }

    pub fn prox(&self, r: f64, y: f64, b: f64) -> f64 {
        let c = self.scale;
        (r + 2.0 * b * c * y) / (1.0 + 2.0 * b * c * c)
    }

    pub fn denoise(&self, r: f64, y: f64, b: f64) -> f64 {
        let c = self.scale;
        2.0 * c * (y - c * r) / (1.0 + 2.0 * b * c * c)
    }

    /// `−∂g/∂r`, independent of `r` and `y`.
    pub fn slope(&self, b: f64) -> f64 {
        let c2 = self.scale * self.scale;
        2.0 * c2 / (1.0 + 2.0 * b * c2)
    }
}

/// Result of applying `f(x) = gain · max(x − threshold, 0)` to the spectrum
/// of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Shrunk {
    pub matrix: DMatrix<f64>,
    /// Divergence of the matrix map in orthonormal (`vec`) coordinates, not
    /// normalised.
    pub divergence: f64,
    /// Eigenvalues of the output, decreasing.
    pub eigenvalues: Vec<f64>,
}

/// Eigen-shrinkage `M ↦ O f(Λ) Oᵀ`.
///
/// The divergence of a spectral function is `Σ_i f'(λ_i)` plus the divided
/// differences `(f(λ_i) − f(λ_j))/(λ_i − λ_j)` over pairs `i < j`; nearly
/// equal pairs use the derivative at their midpoint.
pub fn shrink_spectrum(m: &DMatrix<f64>, threshold: f64, gain: f64) -> Result<Shrunk, SimError> {
    let d = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(SimError::Eigen)?;
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if lam.iter().any(|x| !x.is_finite()) {
        return Err(SimError::Eigen);
    }
    let f = |x: f64| gain * (x - threshold).max(0.0);
    let df = |x: f64| if x > threshold { gain } else { 0.0 };
    let out: Vec<f64> = lam.iter().map(|&x| f(x)).collect();

    let scale = lam.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut divergence: f64 = lam.iter().map(|&x| df(x)).sum();
    for i in 0..d {
        for j in i + 1..d {
            let gap = lam[i] - lam[j];
            divergence += if gap.abs() > 1e-12 * scale {
                (out[i] - out[j]) / gap
            } else {
                df(0.5 * (lam[i] + lam[j]))
            };
        }
    }

    let mut v = eig.eigenvectors.clone();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        col *= out[j];
    }
    let matrix = &v * eig.eigenvectors.transpose();
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    let mut eigenvalues = out;
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(Shrunk {
        matrix,
        divergence,
        eigenvalues,
    })
}

/// Input denoiser on the matrix image `R` of a vector `r`.
///
/// With `Γ = sqrt(2/d) R = O D Oᵀ`, returns
/// `sqrt(d/2) O diag(ReLU(D − 2λ̃)/(2τ + k)) Oᵀ`. The two scalings cancel in
/// the Jacobian, so the divergence is that of the shrinkage applied to `Γ`.
pub fn spectral_denoise_matrix(
    r: &DMatrix<f64>,
    k: f64,
    lambda_tilde: f64,
    tau: f64,
) -> Result<Shrunk, SimError> {
    if !(2.0 * tau + k > 0.0) {
        return Err(SimError::config("k", format!("2τ + k = {} must be positive", 2.0 * tau + k)));
    }
    let d = r.nrows() as f64;
    let gamma = r * (2.0 / d).sqrt();
    let mut s = shrink_spectrum(&gamma, 2.0 * lambda_tilde, 1.0 / (2.0 * tau + k))?;
    let up = (d / 2.0).sqrt();
    s.matrix *= up;
    for x in &mut s.eigenvalues {
        *x *= up;
    }
    Ok(s)
}

/// Input denoiser on vectors: returns `e(r, k)` and `(1/D) ∇·e`.
pub fn spectral_denoiser(
    idx: &VecIndex,
    r: &DVector<f64>,
    k: f64,
    lambda_tilde: f64,
    tau: f64,
) -> Result<(DVector<f64>, f64), SimError> {
    let m = idx.mat(r)?;
    let s = spectral_denoise_matrix(&m, k, lambda_tilde, tau)?;
    Ok((idx.vec_unchecked(&s.matrix), s.divergence / idx.len() as f64))
}
