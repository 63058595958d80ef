//! Finite-size experiments for quadratic two-layer networks: datasets,
//! GAMP with a spectral denoiser, a proximal solver for the equivalent PSD
//! matrix-sensing problem, gradient descent on the network, and the
//! command-line driver built on them.

pub mod cli;
pub mod dataset;
pub mod denoise;
pub mod error;
pub mod experiment;
pub mod gamp;
pub mod gd;
pub mod io;
pub mod observe;
pub mod prox;
pub mod vecmap;

pub use dataset::{generate_dataset, Dataset, DatasetSpec, SensingMode};
pub use error::SimError;
pub use vecmap::VecIndex;
