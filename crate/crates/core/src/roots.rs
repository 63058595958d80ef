//! Scalar root finding: bracketed bisection, polynomial roots and a
//! closed-form cubic solver.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::math::{cos, sin, sqrt, PI};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function is not finite at {x}")]
    NotFinite { x: f64 },
}

/// Bisection on a bracketing interval. Stops when the bracket is narrower
/// than `x_tol` (absolute) or after 200 halvings.
pub fn bisect<E, F>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> Result<Result<f64, RootError>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    let fb = f(b)?;
    if !fa.is_finite() {
        return Ok(Err(RootError::NotFinite { x: a }));
    }
    if !fb.is_finite() {
        return Ok(Err(RootError::NotFinite { x: b }));
    }
    if fa == 0.0 {
        return Ok(Ok(a));
    }
    if fb == 0.0 {
        return Ok(Ok(b));
    }
    if fa.signum() == fb.signum() {
        return Ok(Err(RootError::NoBracket {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        }));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= x_tol || mid == a || mid == b {
            break;
        }
        let fm = f(mid)?;
        if !fm.is_finite() {
            return Ok(Err(RootError::NotFinite { x: mid }));
        }
        if fm == 0.0 {
            return Ok(Ok(mid));
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(Ok(0.5 * (a + b)))
}

/// Evaluate a real polynomial with coefficients in ascending order.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_eval_deriv(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut d = 0.0;
    for c in coeffs.iter().rev() {
        d = d * x + p;
        p = p * x + c;
    }
    (p, d)
}

fn cpoly_eval_deriv(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        d = d * z + p;
        p = p * z + c;
    }
    (p, d)
}

/// All complex roots of a real polynomial (ascending coefficients, nonzero
/// leading term) by the Aberth–Ehrlich iteration.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let radius = 1.0 + c[..n].iter().map(|a| (a / lead).abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64 + 0.4;
            Complex64::new(0.5 * radius * cos(t), 0.5 * radius * sin(t))
        })
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, d) = cpoly_eval_deriv(&c, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / d;
            let mut sum = Complex64::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    sum += (z[i] - zj).inv();
                }
            }
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Newton polish of a real root estimate. Returns `None` if the iteration
/// leaves the neighbourhood or stalls far from a root.
pub fn polish_real_root(coeffs: &[f64], x0: f64, scale: f64) -> Option<f64> {
    let mut x = x0;
    for _ in 0..60 {
        let (p, d) = poly_eval_deriv(coeffs, x);
        if p == 0.0 {
            return Some(x);
        }
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = p / d;
        x -= step;
        if (x - x0).abs() > 0.05 * scale {
            return None;
        }
        if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
    }
    let mag: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| (c * crate::math::powi(x.abs(), k as i32)).abs())
        .sum();
    let (p, _) = poly_eval_deriv(coeffs, x);
    (p.abs() <= 1e-8 * mag.max(f64::MIN_POSITIVE)).then_some(x)
}

/// Roots of the monic cubic `t³ + a2 t² + a1 t + a0` with complex
/// coefficients (Cardano, then two guarded Newton steps per root).
pub fn monic_cubic_roots(a2: Complex64, a1: Complex64, a0: Complex64) -> [Complex64; 3] {
    let third = 1.0 / 3.0;
    let shift = a2 * third;
    let p = a1 - a2 * a2 * third;
    let q = a2 * a2 * a2 * (2.0 / 27.0) - a2 * a1 * third + a0;
    let disc = q * q * 0.25 + p * p * p * (1.0 / 27.0);
    let sd = disc.sqrt();
    let c1 = -q * 0.5 + sd;
    let c2 = -q * 0.5 - sd;
    let cube = if c1.norm() >= c2.norm() { c1 } else { c2 };
    let omega = Complex64::new(-0.5, sqrt(0.75));
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    if cube.norm() == 0.0 {
        roots = [-shift; 3];
    } else {
        let u0 = cube.cbrt();
        let mut u = u0;
        for r in roots.iter_mut() {
            *r = u - p / (u * 3.0) - shift;
            u *= omega;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let f = ((*r + a2) * *r + a1) * *r + a0;
            let d = (*r * 3.0 + a2 * 2.0) * *r + a1;
            if d.norm() == 0.0 {
                break;
            }
            let cand = *r - f / d;
            let fc = ((cand + a2) * cand + a1) * cand + a0;
            if cand.is_finite() && fc.norm() < f.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect::<(), _>(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap().unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_reports_missing_bracket() {
        let r = bisect::<(), _>(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).unwrap();
        assert!(matches!(r, Err(RootError::NoBracket { .. })));
    }

    #[test]
    fn aberth_quartic() {
        // (x - 1)(x + 2)(x² + 1)
        let c = [-2.0, 1.0, -1.0, 1.0, 1.0];
        let mut roots = poly_roots(&c);
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        assert!((roots[0] - Complex64::new(-2.0, 0.0)).norm() < 1e-12);
        assert!((roots[3] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((roots[1].re).abs() < 1e-12 && (roots[1].im.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_roots_satisfy_polynomial() {
        let a2 = Complex64::new(0.3, -1.0);
        let a1 = Complex64::new(-2.0, 0.5);
        let a0 = Complex64::new(1.5, 0.25);
        for r in monic_cubic_roots(a2, a1, a0) {
            let f = ((r + a2) * r + a1) * r + a0;
            assert!(f.norm() < 1e-13, "{f}");
        }
    }

    #[test]
    fn cubic_triple_root() {
        // (t - 1)³
        let r = monic_cubic_roots(
            Complex64::new(-3.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(-1.0, 0.0),
        );
        for t in r {
            assert!((t - 1.0).norm() < 1e-5);
        }
    }

    #[test]
    fn polish_rejects_non_roots() {
        assert!(polish_real_root(&[1.0, 0.0, 1.0], 0.0, 1.0).is_none());
        let r = polish_real_root(&[-2.0, 0.0, 1.0], 1.4, 1.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }
}
