//! Spectral law of `S* + δ Z`, where `S* = W*ᵀW* / sqrt(m* d)` is a rescaled
//! Wishart matrix with aspect ratio `κ* = m*/d` and `Z` is a GOE matrix
//! normalised to the unit semicircle.
//!
//! With `r = sqrt(κ*)`, the resolvent `G(z) = ∫ μ(x) / (z - x) dx` solves
//!
//! ```text
//! (δ²/r) G³ - (z/r + δ²) G² + (z + 1/r - r) G - 1 = 0,
//! ```
//!
//! which is the free additive convolution of the Wishart law with a
//! semicircle of variance `δ²`. At `δ = 0` it reduces to the quadratic of the
//! rescaled Marchenko–Pastur law, which carries an atom of mass `1 - κ*` at
//! the origin when `κ* < 1`. For `z = x - iτ` the physical root has positive
//! imaginary part and the density is `Im G / π`.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::math::{sqrt, PI};
use crate::quadrature::{QuadratureError, RuleSet};
use crate::roots::{monic_cubic_roots, poly_eval, poly_roots, polish_real_root};
use crate::semicircle;

/// Imaginary offset used when evaluating the resolvent on the real axis.
pub const STIELTJES_OFFSET: f64 = 1e-12;

/// Smallest width for which the cubic is solved directly.
pub const MIN_CUBIC_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("kappa_star must be finite and > 0, got {0}")]
    InvalidRatio(f64),
    #[error("width must be finite and >= 0, got {0}")]
    InvalidWidth(f64),
    #[error("self-consistent cubic is degenerate at width {delta:e}; use the zero-width law")]
    DegenerateCubic { delta: f64 },
    #[error("no root matches the physical branch at z = {re} {im:+}i")]
    NoPhysicalRoot { re: f64, im: f64 },
    #[error("support edges could not be resolved at width {delta}")]
    EdgeSearch { delta: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Resolvent value together with whether the point lies in the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesRoot {
    pub value: Complex64,
    pub in_support: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Wishart,
    Deformed,
    /// Wishart bulk plus a semicircle of standard deviation `scale` and mass
    /// `mass` replacing the atom: the leading-order law for tiny widths.
    SmallWidth { scale: f64, mass: f64 },
}

#[derive(Debug, Clone)]
pub struct SpectralLaw {
    kappa_star: f64,
    delta: f64,
    shape: Shape,
    bulks: Vec<Interval>,
    atoms: Vec<Atom>,
}

impl SpectralLaw {
    /// Exact law. `delta = 0` gives the rescaled Marchenko–Pastur law.
    pub fn new(kappa_star: f64, delta: f64) -> Result<Self, SpectralError> {
        check_args(kappa_star, delta)?;
        let delta = delta.abs();
        if delta == 0.0 {
            return Ok(Self::wishart(kappa_star));
        }
        if delta < MIN_CUBIC_WIDTH {
            return Err(SpectralError::DegenerateCubic { delta });
        }
        let r = sqrt(kappa_star);
        let bulks = deformed_bulks(r, delta * delta).ok_or(SpectralError::EdgeSearch { delta })?;
        Ok(Self {
            kappa_star,
            delta,
            shape: Shape::Deformed,
            bulks,
            atoms: Vec::new(),
        })
    }

    /// Leading-order law for `0 < δ ≪ 1`: the Wishart bulk is kept as is and
    /// the atom at zero (when `κ* < 1`) spreads into a semicircle of standard
    /// deviation `δ sqrt(1 - κ*)`.
    pub fn small_width(kappa_star: f64, delta: f64) -> Result<Self, SpectralError> {
        check_args(kappa_star, delta)?;
        let delta = delta.abs();
        let base = Self::wishart(kappa_star);
        if kappa_star >= 1.0 || delta == 0.0 {
            return Ok(Self { delta, ..base });
        }
        let mass = 1.0 - kappa_star;
        let scale = delta * sqrt(mass);
        let mut bulks = alloc::vec![Interval {
            lo: -2.0 * scale,
            hi: 2.0 * scale,
        }];
        bulks.extend(base.bulks);
        Ok(Self {
            kappa_star,
            delta,
            shape: Shape::SmallWidth { scale, mass },
            bulks,
            atoms: Vec::new(),
        })
    }

    fn wishart(kappa_star: f64) -> Self {
        let r = sqrt(kappa_star);
        let (lo, hi) = wishart_edges(r);
        let mut atoms = Vec::new();
        if kappa_star < 1.0 {
            atoms.push(Atom {
                location: 0.0,
                mass: 1.0 - kappa_star,
            });
        }
        Self {
            kappa_star,
            delta: 0.0,
            shape: Shape::Wishart,
            bulks: alloc::vec![Interval { lo, hi }],
            atoms,
        }
    }

    pub fn kappa_star(&self) -> f64 {
        self.kappa_star
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Disjoint support intervals in increasing order.
    pub fn bulks(&self) -> &[Interval] {
        &self.bulks
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        sqrt(self.kappa_star)
    }

    pub fn second_moment(&self) -> f64 {
        1.0 + self.kappa_star + self.delta * self.delta
    }

    /// Whether the law is the small-width approximation.
    pub fn is_approximate(&self) -> bool {
        matches!(self.shape, Shape::SmallWidth { .. })
    }

    /// Resolvent `G(z) = ∫ μ(x)/(z - x) dx` on the physical branch.
    pub fn stieltjes(&self, z: Complex64) -> Result<StieltjesRoot, SpectralError> {
        if z.im > 0.0 {
            let mut root = self.stieltjes(z.conj())?;
            root.value = root.value.conj();
            return Ok(root);
        }
        match self.shape {
            Shape::Wishart => Ok(wishart_stieltjes(sqrt(self.kappa_star), z)),
            Shape::Deformed => self.deformed_stieltjes(z),
            Shape::SmallWidth { scale, mass } => {
                let mut root = wishart_stieltjes(sqrt(self.kappa_star), z);
                let w = z / scale;
                let sc = semicircle_resolvent(w) / scale;
                root.value += (sc - z.inv()) * mass;
                root.in_support = self.bulks.iter().any(|b| b.contains(z.re));
                Ok(root)
            }
        }
    }

    /// Resolvent just below the real axis, at `x - iτ`.
    pub fn stieltjes_real(&self, x: f64) -> Result<StieltjesRoot, SpectralError> {
        self.stieltjes(Complex64::new(x, -STIELTJES_OFFSET))
    }

    /// Absolutely continuous density at `x` (atoms excluded).
    pub fn density(&self, x: f64) -> f64 {
        match self.shape {
            Shape::Wishart => wishart_density(sqrt(self.kappa_star), x),
            Shape::Deformed => deformed_density(sqrt(self.kappa_star), self.delta * self.delta, x),
            Shape::SmallWidth { scale, mass } => {
                wishart_density(sqrt(self.kappa_star), x) + mass * semicircle::density(x / scale) / scale
            }
        }
    }

    /// Distribution function `μ((-∞, x])`.
    pub fn cdf(&self, x: f64) -> Result<f64, SpectralError> {
        let mut rules = RuleSet::new();
        self.cdf_with(&mut rules, x)
    }

    pub fn cdf_with(&self, rules: &mut RuleSet, x: f64) -> Result<f64, SpectralError> {
        let mut acc: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location <= x)
            .map(|a| a.mass)
            .sum();
        for (i, bulk) in self.bulks.iter().enumerate() {
            if x <= bulk.lo {
                continue;
            }
            if let Shape::SmallWidth { scale, mass } = self.shape {
                if i == 0 {
                    acc += mass * semicircle::m0(x / scale);
                    continue;
                }
            }
            let hi = x.min(bulk.hi);
            let (v, _) =
                rules.integrate_edges_adaptive(i, bulk.lo, hi, 1, 1e-13, |t| self.density(t))?;
            acc += v;
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    fn deformed_stieltjes(&self, z: Complex64) -> Result<StieltjesRoot, SpectralError> {
        let r = sqrt(self.kappa_star);
        let s = self.delta * self.delta;
        let candidates = deformed_roots(r, s, z);
        let on_axis = z.im.abs() <= 1e-6 * (1.0 + z.norm());
        if on_axis {
            let in_support = discriminant(r, s, z.re) < 0.0;
            let pick = if in_support {
                candidates
                    .iter()
                    .copied()
                    .max_by(|a, b| a.im.total_cmp(&b.im))
            } else {
                closest_to_tail(&candidates, z)
            };
            return pick
                .map(|value| StieltjesRoot { value, in_support })
                .ok_or(SpectralError::NoPhysicalRoot { re: z.re, im: z.im });
        }
        // Off the axis, the physical root is the one consistent with the
        // subordination relation G(z) = G_wishart(z - δ² G(z)).
        let pick = candidates
            .iter()
            .copied()
            .filter(|g| g.im >= 0.0)
            .map(|g| {
                let omega = z - g * s;
                let sub = wishart_stieltjes(r, omega).value;
                (g, (sub - g).norm())
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(g, _)| g);
        pick.map(|value| StieltjesRoot {
            value,
            in_support: self.bulks.iter().any(|b| b.contains(z.re)),
        })
        .ok_or(SpectralError::NoPhysicalRoot { re: z.re, im: z.im })
    }
}

fn check_args(kappa_star: f64, delta: f64) -> Result<(), SpectralError> {
    if !(kappa_star.is_finite() && kappa_star > 0.0) {
        return Err(SpectralError::InvalidRatio(kappa_star));
    }
    if !delta.is_finite() {
        return Err(SpectralError::InvalidWidth(delta));
    }
    Ok(())
}

/// Edges `(r ∓ 1)² / r` of the rescaled Marchenko–Pastur bulk.
pub fn wishart_edges(r: f64) -> (f64, f64) {
    ((r - 1.0) * (r - 1.0) / r, (r + 1.0) * (r + 1.0) / r)
}

fn wishart_density(r: f64, x: f64) -> f64 {
    let (lo, hi) = wishart_edges(r);
    if x <= lo || x >= hi || x <= 0.0 {
        return 0.0;
    }
    r * sqrt((hi - x) * (x - lo)) / (2.0 * PI * x)
}

fn wishart_stieltjes(r: f64, z: Complex64) -> StieltjesRoot {
    let (lo, hi) = wishart_edges(r);
    let c = z + (1.0 / r - r);
    let a = z / r;
    let disc = (c * c - a * 4.0).sqrt();
    // Stable pair of roots of a g² - c g + 1 = 0.
    let big = if (c + disc).norm() >= (c - disc).norm() {
        c + disc
    } else {
        c - disc
    };
    let g1 = big / (a * 2.0);
    let g2 = Complex64::new(2.0, 0.0) / big;
    let candidates = [g1, g2];
    let on_axis = z.im.abs() <= 1e-6 * (1.0 + z.norm());
    let in_support = z.re > lo && z.re < hi;
    let value = if on_axis && !in_support {
        closest_to_tail(&candidates, z).unwrap_or(g2)
    } else if g1.im >= g2.im {
        g1
    } else {
        g2
    };
    StieltjesRoot { value, in_support }
}

fn closest_to_tail(candidates: &[Complex64], z: Complex64) -> Option<Complex64> {
    let tail = z.inv();
    candidates
        .iter()
        .copied()
        .filter(|g| g.is_finite())
        .min_by(|a, b| (a - tail).norm().total_cmp(&(b - tail).norm()))
}

/// Resolvent of the unit semicircle for `Im w <= 0`.
fn semicircle_resolvent(w: Complex64) -> Complex64 {
    let d = (w * w - 4.0).sqrt();
    let a = (w - d) * 0.5;
    let b = (w + d) * 0.5;
    let (na, nb) = (a.norm(), b.norm());
    if (na - nb).abs() > 1e-12 * (na + nb) {
        if na < nb {
            a
        } else {
            b
        }
    } else if a.im >= b.im {
        a
    } else {
        b
    }
}

/// Roots in `G` of the cubic, obtained through the reversed polynomial in
/// `H = 1/G`, which is monic and stays well scaled for small widths.
fn deformed_roots(r: f64, s: f64, z: Complex64) -> [Complex64; 3] {
    let a = Complex64::new(s / r, 0.0);
    let b = -(z / r + s);
    let c = z + (1.0 / r - r);
    // -H³ + c H² + b H + a = 0
    let hs = monic_cubic_roots(-c, -b, -a);
    [hs[0].inv(), hs[1].inv(), hs[2].inv()]
}

fn deformed_density(r: f64, s: f64, x: f64) -> f64 {
    let z = Complex64::new(x, -STIELTJES_OFFSET);
    let best = deformed_roots(r, s, z)
        .iter()
        .map(|g| g.im)
        .fold(f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        best.max(0.0) / PI
    } else {
        0.0
    }
}

type Poly = [f64; 5];

fn pmul(p: &Poly, q: &Poly) -> Poly {
    let mut out = [0.0; 5];
    for i in 0..5 {
        for j in 0..5 - i {
            out[i + j] += p[i] * q[j];
        }
    }
    out
}

fn padd(p: &Poly, q: &Poly, scale: f64) -> Poly {
    let mut out = *p;
    for i in 0..5 {
        out[i] += scale * q[i];
    }
    out
}

/// Discriminant of the cubic in `G` at real `x`, as a quartic in `x`.
/// Negative exactly inside the support.
pub fn discriminant_poly(r: f64, s: f64) -> [f64; 5] {
    let a = s / r;
    let b: Poly = [-s, -1.0 / r, 0.0, 0.0, 0.0];
    let c: Poly = [1.0 / r - r, 1.0, 0.0, 0.0, 0.0];
    let bc = pmul(&b, &c);
    let b2 = pmul(&b, &b);
    let b3 = pmul(&b2, &b);
    let c2 = pmul(&c, &c);
    let c3 = pmul(&c2, &c);
    let b2c2 = pmul(&b2, &c2);
    // d = -1: 18abcd - 4b³d + b²c² - 4ac³ - 27a²d²
    let mut out = padd(&b2c2, &bc, -18.0 * a);
    out = padd(&out, &b3, 4.0);
    out = padd(&out, &c3, -4.0 * a);
    out[0] -= 27.0 * a * a;
    out
}

fn discriminant(r: f64, s: f64, x: f64) -> f64 {
    poly_eval(&discriminant_poly(r, s), x)
}

fn deformed_bulks(r: f64, s: f64) -> Option<Vec<Interval>> {
    let poly = discriminant_poly(r, s);
    let (_, wishart_hi) = wishart_edges(r);
    let scale = wishart_hi + 2.0 * sqrt(s) + 1.0;
    let scaled: Vec<f64> = poly
        .iter()
        .enumerate()
        .map(|(k, c)| c * crate::math::powi(scale, k as i32))
        .collect();
    let norm = scaled.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let scaled: Vec<f64> = scaled.iter().map(|c| c / norm).collect();
    let mut real: Vec<f64> = poly_roots(&scaled)
        .into_iter()
        .filter(|u| u.im.abs() <= 1e-6 * (1.0 + u.re.abs()))
        .filter_map(|u| polish_real_root(&poly, u.re * scale, scale))
        .collect();
    real.sort_by(f64::total_cmp);
    real.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * scale);
    if real.len() < 2 {
        return None;
    }
    let mut bulks: Vec<Interval> = Vec::new();
    for w in real.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if poly_eval(&poly, mid) < 0.0 {
            match bulks.last_mut() {
                Some(last) if last.hi == w[0] => last.hi = w[1],
                _ => bulks.push(Interval { lo: w[0], hi: w[1] }),
            }
        }
    }
    if bulks.is_empty() {
        return None;
    }
    Some(bulks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(k: f64, d: f64) -> SpectralLaw {
        SpectralLaw::new(k, d).unwrap()
    }

    fn moments(l: &SpectralLaw) -> [f64; 3] {
        let rule = crate::quadrature::GaussLegendre::new(512);
        let mut m = [0.0; 3];
        for b in l.bulks() {
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += rule.integrate_edges(b.lo, b.hi, |x| x.powi(k as i32) * l.density(x));
            }
        }
        for a in l.atoms() {
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += a.mass * a.location.powi(k as i32);
            }
        }
        m
    }

    #[test]
    fn wishart_moments() {
        for &k in &[0.3, 1.0, 2.5] {
            let m = moments(&law(k, 0.0));
            assert!((m[0] - 1.0).abs() < 1e-6, "{k} {m:?}");
            assert!((m[1] - k.sqrt()).abs() < 1e-6);
            assert!((m[2] - 1.0 - k).abs() < 1e-6);
        }
    }

    #[test]
    fn deformed_moments() {
        for &k in &[0.2, 0.5, 1.0, 2.0] {
            for &d in &[0.05, 0.3, 1.0, 3.0] {
                let l = law(k, d);
                let m = moments(&l);
                assert!((m[0] - 1.0).abs() < 1e-6, "{k} {d} {m:?} {:?}", l.bulks());
                assert!((m[1] - k.sqrt()).abs() < 1e-6, "{k} {d} {m:?}");
                assert!((m[2] - 1.0 - k - d * d).abs() < 1e-6, "{k} {d} {m:?}");
            }
        }
    }

    #[test]
    fn two_bulks_for_small_width() {
        let l = law(0.5, 0.05);
        assert_eq!(l.bulks().len(), 2);
        let l = law(0.5, 1.0);
        assert_eq!(l.bulks().len(), 1);
    }

    #[test]
    fn edges_bracket_the_density() {
        for &(k, d) in &[(0.5, 0.05), (0.5, 0.5), (2.0, 0.2), (0.1, 0.01)] {
            let l = law(k, d);
            for b in l.bulks() {
                let eps = 1e-7 * (1.0 + b.width());
                assert!(l.density(b.lo - eps) < 1e-6, "{k} {d}");
                assert!(l.density(b.hi + eps) < 1e-6, "{k} {d}");
                assert!(l.density(b.lo + 1e-3 * b.width()) > 1e-6);
                assert!(l.density(b.hi - 1e-3 * b.width()) > 1e-6);
            }
        }
    }

    #[test]
    fn laurent_tail() {
        let l = law(0.7, 0.4);
        for &z in &[Complex64::new(300.0, -1.0), Complex64::new(-50.0, -400.0)] {
            let g = l.stieltjes(z).unwrap().value;
            assert!((g * z - 1.0).norm() < 1e-2);
            let m = z * (z * g - 1.0);
            assert!((m - 0.7f64.sqrt()).norm() < 2e-2, "{m}");
        }
    }

    #[test]
    fn small_width_approaches_wishart() {
        let k = 0.6;
        let w = law(k, 0.0);
        let d = law(k, 1e-4);
        let (lo, hi) = wishart_edges(k.sqrt());
        for i in 1..10 {
            let x = lo + (hi - lo) * i as f64 / 10.0;
            let gw = w.stieltjes_real(x).unwrap().value;
            let gd = d.stieltjes_real(x).unwrap().value;
            assert!((gw - gd).norm() < 1e-6, "{x}: {gw} {gd}");
        }
    }

    #[test]
    fn off_axis_branch_is_nevanlinna() {
        let l = law(0.5, 0.3);
        for &z in &[
            Complex64::new(0.0, -0.05),
            Complex64::new(1.0, -0.5),
            Complex64::new(3.0, -0.01),
        ] {
            let g = l.stieltjes(z).unwrap().value;
            assert!(g.im > 0.0, "{z}: {g}");
        }
    }

    #[test]
    fn cdf_reaches_one() {
        let l = law(0.5, 0.2);
        let top = l.bulks().last().unwrap().hi;
        assert!((l.cdf(top + 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(l.cdf(l.bulks()[0].lo - 1.0).unwrap(), 0.0);
        let w = law(0.5, 0.0);
        assert!((w.cdf(0.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn small_width_law_has_expected_mass_split() {
        let l = SpectralLaw::small_width(0.4, 1e-5).unwrap();
        assert_eq!(l.bulks().len(), 2);
        assert!((l.cdf(l.bulks()[0].hi).unwrap() - 0.6).abs() < 1e-10);
    }
}
