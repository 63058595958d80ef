//! One finite-size realization: generate data, solve, measure.

use quadnet_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate_dataset, Dataset, DatasetSpec, SensingMode};
use crate::error::SimError;
use crate::gamp::{gamp_solve, GampConfig};
use crate::gd::{gd_train, GdConfig};
use crate::observe::{singular_values, test_error, zero_fraction};
use crate::prox::{objective, prox_gradient_solve, ProxConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Gamp,
    Prox,
    Gd,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gamp => "gamp",
            Self::Prox => "prox",
            Self::Gd => "gd",
        }
    }
}

/// GD hyperparameters other than the width and `λ`, which come from the
/// model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdSettings {
    pub eta: f64,
    pub steps: usize,
    pub init_std: f64,
}

impl Default for GdSettings {
    fn default() -> Self {
        let c = GdConfig::new(1, 0.0, 0);
        Self {
            eta: c.eta,
            steps: c.steps,
            init_std: c.init_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub params: ModelParams,
    pub dim: usize,
    pub seed: u64,
    pub solver: Solver,
    pub sensing: SensingMode,
    pub gd: GdSettings,
    pub gamp: GampConfig,
    pub prox: ProxConfig,
}

impl RunSpec {
    pub fn new(params: ModelParams, dim: usize, seed: u64, solver: Solver) -> Self {
        Self {
            params,
            dim,
            seed,
            solver,
            sensing: match solver {
                Solver::Gd => SensingMode::Gaussian,
                _ => SensingMode::Goe,
            },
            gd: GdSettings::default(),
            gamp: GampConfig::default(),
            prox: ProxConfig::default(),
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        let p = &self.params;
        DatasetSpec::from_ratios(self.dim, p.alpha, p.kappa_star, p.noise, self.seed, self.sensing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub test_error: f64,
    pub zero_fraction: f64,
    /// Objective of the matrix problem at the estimate, per `d²`.
    pub train_loss_density: f64,
    pub iterations: usize,
    /// Eigenvalues of the estimate, decreasing.
    pub eigenvalues: Vec<f64>,
}

/// Solve an existing dataset.
pub fn solve_dataset(ds: &Dataset, spec: &RunSpec) -> Result<RunResult, SimError> {
    let p = &spec.params;
    let (estimate, eigenvalues, iterations) = match spec.solver {
        Solver::Gamp => {
            let out = gamp_solve(ds, p, &spec.gamp)?;
            if !out.converged {
                let change = out.trajectory.last().map_or(f64::NAN, |t| t.change);
                return Err(SimError::NotConverged {
                    iterations: out.trajectory.len(),
                    change,
                });
            }
            (out.estimate, out.eigenvalues, out.trajectory.len())
        }
        Solver::Prox => {
            let out = prox_gradient_solve(ds, p, &spec.prox, None)?;
            (out.estimate, out.eigenvalues, out.iterations)
        }
        Solver::Gd => {
            let width = ((p.kappa * ds.dim() as f64).round() as usize).max(ds.dim());
            let cfg = GdConfig {
                width,
                lambda: p.lambda,
                eta: spec.gd.eta,
                steps: spec.gd.steps,
                init_std: spec.gd.init_std,
                seed: spec.seed ^ 0x9e37_79b9_7f4a_7c15,
            };
            let out = gd_train(ds, &cfg)?;
            (out.estimate, out.eigenvalues, out.steps)
        }
    };
    let d2 = (ds.dim() * ds.dim()) as f64;
    Ok(RunResult {
        test_error: test_error(&estimate, &ds.target),
        zero_fraction: zero_fraction(&singular_values(&eigenvalues)),
        train_loss_density: objective(ds, p, &estimate) / d2,
        iterations,
        eigenvalues,
    })
}

pub fn run_simulation(spec: &RunSpec) -> Result<RunResult, SimError> {
    let ds = generate_dataset(&spec.dataset_spec())?;
    solve_dataset(&ds, spec)
}
