//! Model parameters shared by the theory and the simulators.

use crate::math::sqrt;

/// Validation failure for [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

/// Proportional-regime parameters.
///
/// `alpha = n / d²`, `kappa_star = m* / d`, `kappa = m / d`. `lambda` is the
/// weight-decay strength on `‖W‖²_F`; `tau` adds `d τ/2 ‖S‖²_F` to the
/// objective in matrix form and is only used for cross-checks. `noise` is
/// the label-noise variance `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub kappa_star: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub tau: f64,
    pub noise: f64,
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        kappa_star: f64,
        kappa: f64,
        lambda: f64,
        noise: f64,
    ) -> Result<Self, ParamError> {
        let p = Self {
            alpha,
            kappa_star,
            kappa,
            lambda,
            tau: 0.0,
            noise,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self, ParamError> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, ParamError> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        positive("alpha", self.alpha)?;
        positive("kappa_star", self.kappa_star)?;
        positive("kappa", self.kappa)?;
        non_negative("lambda", self.lambda)?;
        non_negative("tau", self.tau)?;
        non_negative("noise", self.noise)?;
        Ok(())
    }

    /// `λ̃ = sqrt(κ) λ`, the only combination of width and weight decay the
    /// asymptotics depend on.
    pub fn reduced_lambda(&self) -> f64 {
        sqrt(self.kappa) * self.lambda
    }

    /// Second moment of the target spectrum, `1 + κ*`.
    pub fn target_second_moment(&self) -> f64 {
        1.0 + self.kappa_star
    }

    /// Mean of the target spectrum, `sqrt(κ*)`.
    pub fn target_mean(&self) -> f64 {
        sqrt(self.kappa_star)
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::OutOfRange {
            name,
            requirement: "finite and > 0",
            value,
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::OutOfRange {
            name,
            requirement: "finite and >= 0",
            value,
        })
    }
}
