//! Teacher-student datasets.
//!
//! Gaussian mode draws inputs `x ~ N(0, I_d)` and labels from the quadratic
//! teacher `f*(x) = (1/√m*) Σ_k [(w_k·x)²/d − ‖w_k‖²/d]`, which equals
//! `Tr[X(x) S*]` with `X(x) = (xxᵀ − I)/√d`. GOE mode replaces `X(x)` by a
//! GOE matrix with the same covariance: off-diagonal variance `1/d`,
//! diagonal variance `2/d`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::vecmap::VecIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingMode {
    Gaussian,
    Goe,
}

impl SensingMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Goe => "goe",
        }
    }
}

impl core::str::FromStr for SensingMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "goe" => Ok(Self::Goe),
            _ => Err(SimError::config("mode", format!("unknown sensing mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub dim: usize,
    pub samples: usize,
    pub target_width: usize,
    pub noise: f64,
    pub seed: u64,
    pub mode: SensingMode,
}

impl DatasetSpec {
    /// `n = round(α d²)` samples and `m* = round(κ* d)` teacher units.
    pub fn from_ratios(
        dim: usize,
        alpha: f64,
        kappa_star: f64,
        noise: f64,
        seed: u64,
        mode: SensingMode,
    ) -> Self {
        let d2 = (dim * dim) as f64;
        Self {
            dim,
            samples: (alpha * d2).round() as usize,
            target_width: ((kappa_star * dim as f64).round() as usize).max(1),
            noise,
            seed,
            mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    /// Gaussian mode: `n × d`, one input per row. GOE mode: `n × D`, row `μ`
    /// holding `vec(Z^μ)`.
    pub inputs: DMatrix<f64>,
    pub labels: DVector<f64>,
    /// `m* × d` teacher weights.
    pub target_weights: DMatrix<f64>,
    /// `S* = W*ᵀ W* / sqrt(m* d)`.
    pub target: DMatrix<f64>,
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, SimError> {
    if spec.dim == 0 || spec.target_width == 0 {
        return Err(SimError::config("dim", "dimension and teacher width must be positive"));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(SimError::config("noise", format!("{} is not a variance", spec.noise)));
    }
    let (d, n, ms) = (spec.dim, spec.samples, spec.target_width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let target_weights = normal_matrix(&mut rng, ms, d, 1.0);
    let target = target_weights.tr_mul(&target_weights) / ((ms * d) as f64).sqrt();

    let (inputs, clean) = match spec.mode {
        SensingMode::Gaussian => {
            let x = normal_matrix(&mut rng, n, d, 1.0);
            let clean = network_outputs(&x, &target_weights);
            (x, clean)
        }
        SensingMode::Goe => {
            let idx = VecIndex::new(d);
            // Every slot of vec(Z) is N(0, 2/d): diagonals directly, and
            // off-diagonals as √2 times an N(0, 1/d) entry.
            let a = normal_matrix(&mut rng, n, idx.len(), (2.0 / d as f64).sqrt());
            let clean = &a * idx.vec_unchecked(&target);
            (a, clean)
        }
    };
    let sd = spec.noise.sqrt();
    let labels = DVector::from_fn(n, |i, _| {
        let xi: f64 = rng.sample(StandardNormal);
        clean[i] + sd * xi
    });
    Ok(Dataset {
        spec: *spec,
        inputs,
        labels,
        target_weights,
        target,
    })
}

/// Row-major fill so that each row is drawn contiguously from the stream.
fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = rng.sample(StandardNormal);
            m[(i, j)] = scale * z;
        }
    }
    m
}

/// `(1/√m) Σ_k σ_k(w_k·x/√d)` with the centered square activation.
pub fn network_outputs(x: &DMatrix<f64>, weights: &DMatrix<f64>) -> DVector<f64> {
    let (m, d) = weights.shape();
    let norms: f64 = weights.iter().map(|w| w * w).sum();
    let mut pre = x * weights.transpose();
    pre.apply(|p| *p = *p * *p);
    let sq = pre.column_sum();
    sq.map(|s| (s - norms) / (d as f64 * (m as f64).sqrt()))
}

/// A GOE(d) matrix with off-diagonal variance `1/d`; its spectrum tends to
/// the semicircle on `[-2, 2]`.
pub fn sample_goe(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(dim, dim);
    let s = (1.0 / dim as f64).sqrt();
    for a in 0..dim {
        let g: f64 = rng.sample(StandardNormal);
        z[(a, a)] = core::f64::consts::SQRT_2 * s * g;
        for b in a + 1..dim {
            let g: f64 = rng.sample(StandardNormal);
            z[(a, b)] = s * g;
            z[(b, a)] = s * g;
        }
    }
    z
}

/// Eigenvalues of `S* + δ Z` with `Z ~ GOE(d)` and `m* = round(κ* d)`.
pub fn deformed_target_spectrum(dim: usize, kappa_star: f64, width: f64, seed: u64) -> Vec<f64> {
    let ms = ((kappa_star * dim as f64).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = normal_matrix(&mut rng, ms, dim, 1.0);
    let mut s = w.tr_mul(&w) / ((ms * dim) as f64).sqrt();
    if width > 0.0 {
        s += sample_goe(&mut rng, dim) * width;
    }
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn samples(&self) -> usize {
        self.spec.samples
    }

    pub fn index(&self) -> VecIndex {
        VecIndex::new(self.spec.dim)
    }

    /// `α = n/d²`.
    pub fn alpha(&self) -> f64 {
        self.spec.samples as f64 / (self.spec.dim * self.spec.dim) as f64
    }

    pub fn kappa_star(&self) -> f64 {
        self.spec.target_width as f64 / self.spec.dim as f64
    }

    /// `Tr[X^μ S]` for every sample.
    pub fn forward(&self, s: &DMatrix<f64>) -> DVector<f64> {
        let d = self.spec.dim;
        match self.spec.mode {
            SensingMode::Gaussian => {
                let mut p = &self.inputs * s;
                p.component_mul_assign(&self.inputs);
                let trace = s.trace();
                p.column_sum().map(|v| (v - trace) / (d as f64).sqrt())
            }
            SensingMode::Goe => &self.inputs * self.index().vec_unchecked(s),
        }
    }

    /// `Σ_μ v_μ X^μ`, the adjoint of [`Dataset::forward`].
    pub fn adjoint(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let d = self.spec.dim;
        match self.spec.mode {
            SensingMode::Gaussian => {
                let mut scaled = self.inputs.transpose();
                for (mut col, &w) in scaled.column_iter_mut().zip(v.iter()) {
                    col *= w;
                }
                let mut g = scaled * &self.inputs;
                let total = v.sum();
                for a in 0..d {
                    g[(a, a)] -= total;
                }
                let g = (&g + g.transpose()) * 0.5;
                g / (d as f64).sqrt()
            }
            SensingMode::Goe => {
                let packed = self.inputs.tr_mul(v);
                self.index().unpack(packed.as_slice())
            }
        }
    }

    /// `X^μ` as a dense matrix.
    pub fn sensing_matrix(&self, mu: usize) -> DMatrix<f64> {
        let d = self.spec.dim;
        match self.spec.mode {
            SensingMode::Gaussian => {
                let x = self.inputs.row(mu).transpose();
                (&x * x.transpose() - DMatrix::identity(d, d)) / (d as f64).sqrt()
            }
            SensingMode::Goe => {
                let row: Vec<f64> = self.inputs.row(mu).iter().copied().collect();
                self.index().unpack(&row)
            }
        }
    }
}
