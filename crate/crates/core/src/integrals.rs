//! The truncated second moment
//!
//! ```text
//! J(a, b) = ∫_b^∞ μ_a(x) (x - b)² dx,
//! ```
//!
//! where `μ_a` is the law of `S* + a Z`, together with its partial
//! derivatives. `J` is even in `a`.
//!
//! Partials are integrals of their own: `∂_b J = -2 ∫ (x - b)₊ dμ_a`, and
//! since `μ_a` follows the free heat flow in `a²`,
//!
//! ```text
//! ∂_a J / a = 4 ∫ (x - b)₊ Re G_a(x) μ_a(x) dx,
//! ```
//!
//! with `G_a` the Stieltjes transform. For `a` below [`SMALL_WIDTH`] (and a
//! threshold below the Wishart bulk) the closed-form small-width expansion
//! is used instead.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math::{floor, log10, powi, round, sqrt, PI};
use crate::quadrature::{RuleSet, ORDERS};
use crate::semicircle::{lower_square, lower_square_deriv};
use crate::spectral::{wishart_edges, SpectralError, SpectralLaw};

/// Width below which the small-width expansion replaces the cubic.
pub const SMALL_WIDTH: f64 = 1e-4;

/// Relative quadrature tolerance.
pub const QUAD_TOL: f64 = 1e-9;

const CACHE_LIMIT: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum IntegralError {
    #[error("argument `{name}` is not finite: {value}")]
    NotFinite { name: &'static str, value: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

impl From<crate::quadrature::QuadratureError> for IntegralError {
    fn from(e: crate::quadrature::QuadratureError) -> Self {
        Self::Spectral(e.into())
    }
}

/// `J` and its partials at one point. `d_a_over_a` is `∂_a J / a`, with its
/// finite limit at `a = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JPartials {
    pub value: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_a_over_a: f64,
}

type Key = (i64, i32);

fn key(x: f64) -> Key {
    if x == 0.0 || !x.is_finite() {
        return (0, 0);
    }
    let e = floor(log10(x.abs())) as i32;
    (round(x * powi(10.0, 11 - e)) as i64, e)
}

/// Evaluator of `J` for a fixed `κ*`. Owns its quadrature rules and a memo
/// table; give each worker its own evaluator.
#[derive(Debug, Clone)]
pub struct JEvaluator {
    kappa_star: f64,
    rules: RuleSet,
    hints: Vec<usize>,
    cache: BTreeMap<(Key, Key), JPartials>,
    small_width: f64,
}

impl JEvaluator {
    pub fn new(kappa_star: f64) -> Result<Self, IntegralError> {
        if !(kappa_star.is_finite() && kappa_star > 0.0) {
            return Err(SpectralError::InvalidRatio(kappa_star).into());
        }
        Ok(Self {
            kappa_star,
            rules: RuleSet::new(),
            hints: alloc::vec![1; 3],
            cache: BTreeMap::new(),
            small_width: SMALL_WIDTH,
        })
    }

    /// Disable the small-width expansion (exact cubic everywhere).
    pub fn without_small_width(mut self) -> Self {
        self.small_width = 0.0;
        self
    }

    pub fn kappa_star(&self) -> f64 {
        self.kappa_star
    }

    pub fn rules(&mut self) -> &mut RuleSet {
        &mut self.rules
    }

    /// Law used for width `a`: the small-width approximation below the
    /// switch, the exact law otherwise.
    pub fn law(&self, a: f64) -> Result<SpectralLaw, SpectralError> {
        let a = a.abs();
        if a > 0.0 && a < self.small_width {
            SpectralLaw::small_width(self.kappa_star, a)
        } else {
            SpectralLaw::new(self.kappa_star, a)
        }
    }

    pub fn value(&mut self, a: f64, b: f64) -> Result<f64, IntegralError> {
        Ok(self.partials(a, b)?.value)
    }

    pub fn partials(&mut self, a: f64, b: f64) -> Result<JPartials, IntegralError> {
        finite("a", a)?;
        finite("b", b)?;
        let a = a.abs();
        let k = (key(a), key(b));
        if let Some(p) = self.cache.get(&k) {
            return Ok(*p);
        }
        let p = match self.small_width_partials(a, b) {
            Some(p) => p,
            None => self.quadrature_partials(a, b)?,
        };
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(k, p);
        Ok(p)
    }

    fn small_width_partials(&self, a: f64, b: f64) -> Option<JPartials> {
        if a >= self.small_width {
            return None;
        }
        let k = self.kappa_star;
        let r = sqrt(k);
        let (lo, _) = wishart_edges(r);
        // The expansion treats the Wishart bulk as lying entirely above b.
        if (1.0 - k).abs() < 1e-6 || b > lo - 100.0 * a || (k > 1.0 && lo < 1e-3) {
            return None;
        }
        let q_star = 1.0 + k;
        let full = q_star + a * a - 2.0 * b * r + b * b;
        let full_db = -2.0 * r + 2.0 * b;
        if k >= 1.0 {
            return Some(JPartials {
                value: full,
                d_a: 2.0 * a,
                d_b: full_db,
                d_a_over_a: 2.0,
            });
        }
        let w = 1.0 - k;
        let sw = sqrt(w);
        let (phi_term, dphi_b, shape) = if a == 0.0 {
            if b > 0.0 {
                (w * b * b, 2.0 * w * b, 2.0)
            } else if b < 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                (0.0, 0.0, 1.0)
            }
        } else {
            let sigma = a * sw;
            let t = b / sigma;
            let phi = lower_square(t);
            let dphi = lower_square_deriv(t);
            (
                w * sigma * sigma * phi,
                w * sigma * dphi,
                2.0 * phi - t * dphi,
            )
        };
        let d_a_over_a = 2.0 - w * w * shape;
        Some(JPartials {
            value: full - phi_term,
            d_a: a * d_a_over_a,
            d_b: full_db - dphi_b,
            d_a_over_a,
        })
    }

    fn quadrature_partials(&mut self, a: f64, b: f64) -> Result<JPartials, IntegralError> {
        let law = SpectralLaw::new(self.kappa_star, a)?;
        let (value, _) = self.integrate(&law, b, None)?;
        let d_b = -2.0 * self.first_moment(&law, b)?;
        let d_a_over_a = if a > 0.0 {
            4.0 * self.flow_integral(&law, b)?
        } else {
            let h = 1e-3;
            let far = SpectralLaw::new(self.kappa_star, h)?;
            let jh = self.integrate(&far, b, None)?.0;
            2.0 * (jh - value) / (h * h)
        };
        Ok(JPartials {
            value,
            d_a: a * d_a_over_a,
            d_b,
            d_a_over_a,
        })
    }

    /// `∫ (x - b)₊ dμ`.
    fn first_moment(&mut self, law: &SpectralLaw, b: f64) -> Result<f64, IntegralError> {
        let tol = QUAD_TOL * (law.second_moment() + b * b);
        let mut acc = 0.0;
        for atom in law.atoms() {
            acc += atom.mass * (atom.location - b).max(0.0);
        }
        for (i, bulk) in law.bulks().iter().enumerate() {
            let lower = bulk.lo.max(b);
            if lower >= bulk.hi {
                continue;
            }
            let hint = self.hints.get(i).copied().unwrap_or(1).saturating_sub(1);
            let f = |x: f64| (x - b) * law.density(x);
            acc += self.rules.integrate_edges_adaptive(i, lower, bulk.hi, hint, tol, f)?.0;
        }
        Ok(acc)
    }

    /// `∫ (x - b)₊ Re G(x) dμ(x)`, the rate of change of `J/2` along the
    /// free heat flow `a² ↦ a² + t`. Atomless laws only.
    fn flow_integral(&mut self, law: &SpectralLaw, b: f64) -> Result<f64, IntegralError> {
        let tol = QUAD_TOL * (1.0 + b.abs());
        let mut acc = 0.0;
        for (i, bulk) in law.bulks().iter().enumerate() {
            let lower = bulk.lo.max(b);
            if lower >= bulk.hi {
                continue;
            }
            let hint = self.hints.get(i).copied().unwrap_or(1).saturating_sub(1);
            let mut failure = None;
            let f = |x: f64| match law.stieltjes_real(x) {
                Ok(g) => (x - b) * g.value.im * g.value.re / PI,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            let v = self.rules.integrate_edges_adaptive(i, lower, bulk.hi, hint, tol, f)?.0;
            if let Some(e) = failure {
                return Err(e.into());
            }
            acc += v;
        }
        Ok(acc)
    }

    /// `∫ (x - b)₊² dμ` for a given law. With `orders = None` the order is
    /// chosen adaptively per bulk; otherwise the given orders are reused.
    pub fn integrate(
        &mut self,
        law: &SpectralLaw,
        b: f64,
        orders: Option<&[usize]>,
    ) -> Result<(f64, Vec<usize>), IntegralError> {
        let tol = QUAD_TOL * (law.second_moment() + b * b);
        let mut used = Vec::with_capacity(law.bulks().len());
        let mut acc = 0.0;
        for atom in law.atoms() {
            let t = atom.location - b;
            if t > 0.0 {
                acc += atom.mass * t * t;
            }
        }
        for (i, bulk) in law.bulks().iter().enumerate() {
            let lower = bulk.lo.max(b);
            if lower >= bulk.hi {
                used.push(self.hints.get(i).copied().unwrap_or(1));
                continue;
            }
            let f = |x: f64| {
                let t = x - b;
                t * t * law.density(x)
            };
            let v = match orders {
                Some(o) => {
                    let idx = o.get(i).copied().unwrap_or_else(|| o.iter().copied().max().unwrap_or(1));
                    used.push(idx);
                    self.rules.rule(idx).integrate_edges(lower, bulk.hi, f)
                }
                None => {
                    if self.hints.len() <= i {
                        self.hints.resize(i + 1, 1);
                    }
                    let start = self.hints[i].saturating_sub(1);
                    let (v, idx) =
                        self.rules
                            .integrate_edges_adaptive(i, lower, bulk.hi, start, tol, f)?;
                    self.hints[i] = idx.min(ORDERS.len() - 1);
                    used.push(idx);
                    v
                }
            };
            acc += v;
        }
        Ok((acc, used))
    }

    /// `∫∫ μ(x) μ(y) [((x - c)₊ - (y - c)₊) / (x - y)]² dx dy` for the law of
    /// width `a`, the stability integral of the ridge fixed point.
    pub fn replicon_integral(&mut self, a: f64, c: f64) -> Result<f64, IntegralError> {
        let law = self.law(a)?;
        let mut prev = f64::NAN;
        for idx in 3..ORDERS.len() - 2 {
            let nodes = self.weighted_nodes(&law, c, idx);
            let v = replicon_sum(&nodes, c);
            if (v - prev).abs() <= 1e-7 * v.abs().max(1e-12) {
                return Ok(v);
            }
            prev = v;
        }
        Ok(prev)
    }

    fn weighted_nodes(&mut self, law: &SpectralLaw, c: f64, idx: usize) -> Vec<(f64, f64)> {
        let mut nodes: Vec<(f64, f64)> = law.atoms().iter().map(|a| (a.location, a.mass)).collect();
        for bulk in law.bulks() {
            let mut pieces = alloc::vec![(bulk.lo, bulk.hi)];
            if c > bulk.lo && c < bulk.hi {
                pieces = alloc::vec![(bulk.lo, c), (c, bulk.hi)];
            }
            for (lo, hi) in pieces {
                let rule = self.rules.rule(idx);
                nodes.extend(rule.edge_nodes(lo, hi).map(|(x, w)| (x, w * law.density(x))));
            }
        }
        nodes
    }
}

fn replicon_sum(nodes: &[(f64, f64)], c: f64) -> f64 {
    let relu = |x: f64| (x - c).max(0.0);
    let mut acc = 0.0;
    for (i, &(x, wx)) in nodes.iter().enumerate() {
        if wx == 0.0 {
            continue;
        }
        let rx = relu(x);
        let mut row = 0.0;
        for (j, &(y, wy)) in nodes.iter().enumerate() {
            let k = if i == j || x == y {
                if x > c {
                    1.0
                } else {
                    0.0
                }
            } else {
                let q = (rx - relu(y)) / (x - y);
                q * q
            };
            row += wy * k;
        }
        acc += wx * row;
    }
    acc
}

fn finite(name: &'static str, value: f64) -> Result<(), IntegralError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(IntegralError::NotFinite { name, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_threshold_gives_second_moment_when_support_is_positive() {
        // κ* > 1 and small width: the whole law sits above 0.
        let mut ev = JEvaluator::new(2.0).unwrap();
        let j = ev.value(0.05, 0.0).unwrap();
        assert!((j - (3.0 + 0.0025)).abs() < 1e-8, "{j}");
    }

    #[test]
    fn large_width_half_moment() {
        let mut ev = JEvaluator::new(0.5).unwrap();
        let a = 300.0;
        let j = ev.value(a, 0.0).unwrap();
        assert!((j / (a * a) - 0.5).abs() < 1e-2, "{}", j / (a * a));
    }

    #[test]
    fn b_derivative_matches_first_moment() {
        let mut ev = JEvaluator::new(0.5).unwrap();
        let (a, b) = (0.4, 0.3);
        let p = ev.partials(a, b).unwrap();
        let law = SpectralLaw::new(0.5, a).unwrap();
        let rule = crate::quadrature::GaussLegendre::new(1024);
        let mut first = 0.0;
        for bulk in law.bulks() {
            let lo = bulk.lo.max(b);
            if lo < bulk.hi {
                first += rule.integrate_edges(lo, bulk.hi, |x| (x - b) * law.density(x));
            }
        }
        assert!((p.d_b + 2.0 * first).abs() < 1e-6, "{} {}", p.d_b, -2.0 * first);
    }

    #[test]
    fn width_derivative_matches_differences() {
        let k = 0.7;
        let mut ev = JEvaluator::new(k).unwrap();
        for &(a, b) in &[(0.6, 0.2), (0.3, 1.0), (0.05, 0.1), (1.5, -0.4)] {
            let p = ev.partials(a, b).unwrap();
            let h = 1e-3;
            let mut j = |x: f64| {
                let law = SpectralLaw::new(k, x).unwrap();
                let orders = alloc::vec![8; law.bulks().len()];
                ev.integrate(&law, b, Some(&orders)).unwrap().0
            };
            let fd = (-j(a + 2.0 * h) + 8.0 * j(a + h) - 8.0 * j(a - h) + j(a - 2.0 * h)) / (12.0 * h);
            assert!((fd - p.d_a).abs() < 1e-8, "{a} {b}: {fd} {}", p.d_a);
        }
    }

    #[test]
    fn small_width_expansion_matches_cubic() {
        let k = 0.5;
        let mut approx = JEvaluator::new(k).unwrap();
        let mut exact = JEvaluator::new(k).unwrap().without_small_width();
        for &(a, b) in &[(5e-5, 0.0), (8e-5, 1e-4), (2e-5, -1e-5), (9e-5, 0.01)] {
            let pa = approx.partials(a, b).unwrap();
            let pe = exact.partials(a, b).unwrap();
            assert!((pa.value - pe.value).abs() < 1e-9, "{a} {b}: {pa:?} {pe:?}");
            assert!((pa.d_b - pe.d_b).abs() < 1e-6, "{a} {b}: {pa:?} {pe:?}");
        }
    }

    #[test]
    fn replicon_integral_is_bounded_by_one() {
        let mut ev = JEvaluator::new(0.5).unwrap();
        for &(a, c) in &[(0.3, 0.1), (1.0, 0.0), (0.05, 0.5)] {
            let v = ev.replicon_integral(a, c).unwrap();
            assert!(v > 0.0 && v <= 1.0 + 1e-9, "{a} {c}: {v}");
        }
        // Threshold below the support: the kernel is identically one.
        let v = ev.replicon_integral(0.3, -10.0).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cache_keys_round_to_twelve_digits() {
        assert_eq!(key(1.0), key(1.0 + 1e-14));
        assert_ne!(key(1.0), key(1.0 + 1e-9));
    }
}
