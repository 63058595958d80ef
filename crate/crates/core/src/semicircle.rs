//! Unit-variance semicircle law on `[-2, 2]` and its incomplete moments
//! `M_k(x) = ∫_{-2}^{x} y^k ρ(y) dy`.

use crate::math::{asin, sqrt, PI};

/// Density `sqrt(4 - y²) / 2π`.
pub fn density(y: f64) -> f64 {
    if y.abs() >= 2.0 {
        0.0
    } else {
        sqrt(4.0 - y * y) / (2.0 * PI)
    }
}

fn root(x: f64) -> f64 {
    sqrt((4.0 - x * x).max(0.0))
}

/// `M_0(x)`, the distribution function.
pub fn m0(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    (0.5 * x * root(x) + 2.0 * asin(0.5 * x) + PI) / (2.0 * PI)
}

/// `M_1(x)`.
pub fn m1(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        return 0.0;
    }
    let r = root(x);
    -(r * r * r) / (6.0 * PI)
}

/// `M_2(x)`.
pub fn m2(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    (x / 8.0 * (2.0 * x * x - 4.0) * root(x) + 2.0 * asin(0.5 * x) + PI) / (2.0 * PI)
}

/// `∫_{y<t} (y - t)² ρ(y) dy`.
pub fn lower_square(t: f64) -> f64 {
    if t <= -2.0 {
        0.0
    } else if t >= 2.0 {
        1.0 + t * t
    } else {
        m2(t) - 2.0 * t * m1(t) + t * t * m0(t)
    }
}

/// Derivative of [`lower_square`], `2 ∫_{y<t} (t - y) ρ(y) dy`.
pub fn lower_square_deriv(t: f64) -> f64 {
    if t <= -2.0 {
        0.0
    } else if t >= 2.0 {
        2.0 * t
    } else {
        2.0 * (t * m0(t) - m1(t))
    }
}
