//! Asymptotic theory of empirical risk minimization for two-layer networks
//! with quadratic activation and a quadratic target.
//!
//! The training problem over the first-layer weights `W` maps onto a convex
//! problem over the PSD matrix `S = WᵀW / sqrt(m d)`: square loss plus a
//! nuclear-norm penalty. This crate computes its high-dimensional limit:
//!
//! * [`spectral`]: the law of `S* + δ Z` (Wishart target plus GOE noise),
//!   its Stieltjes transform, density, bulk edges and distribution function.
//! * [`integrals`]: the truncated second moment `J(a, b)` driving the
//!   state evolution, with its partial derivatives.
//! * [`state_evolution`]: the fixed-point equations for the order
//!   parameters and the observables derived from them.
//! * [`thresholds`]: interpolation and perfect-recovery thresholds and the
//!   small-rank closed forms.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod math;
pub mod params;
pub mod quadrature;
pub mod roots;
pub mod semicircle;
pub mod spectral;
pub mod integrals;
pub mod state_evolution;
pub mod thresholds;

pub use integrals::{JEvaluator, JPartials};
pub use params::{ModelParams, ParamError};
pub use spectral::{SpectralLaw, StieltjesRoot};
pub use state_evolution::{Branch, FixedPoint, Observables, SeError, SeState, SolverConfig};

