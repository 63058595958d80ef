use quadnet_core::state_evolution::SeError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("invalid setting `{name}`: {reason}")]
    Config { name: &'static str, reason: String },
    #[error("eigendecomposition failed")]
    Eigen,
    #[error("iterates blew up at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("no convergence after {iterations} iterations (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },
    #[error("GD diverged at step {step}; reduce the learning rate")]
    LossBlowUp { step: usize },
    #[error(transparent)]
    Theory(#[from] SeError),
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub(crate) fn config(name: &'static str, reason: impl Into<String>) -> Self {
        Self::Config {
            name,
            reason: reason.into(),
        }
    }
}
