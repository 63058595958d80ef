//! Gauss–Legendre rules and an order-doubling integrator for densities with
//! square-root edges.
//!
//! Densities in this crate vanish like a square root at their support edges.
//! Substituting `x = mid - half·cos θ` turns such integrands into analytic
//! functions of `θ`, so a fixed Gauss rule usually converges spectrally.
//! The order is raised first; integrands with interior features (a bulk
//! that has just merged, a kink inside the support) fall back to bisection
//! of the `θ` interval.

use alloc::vec::Vec;

use crate::math::{cos, sin, PI};

/// Orders tried by [`RuleSet`], smallest first.
pub const ORDERS: [usize; 9] = [16, 32, 64, 128, 256, 512, 1024, 2048, 4096];

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error(
        "quadrature over bulk {bulk} = [{lo}, {hi}] did not reach tolerance \
         (last change {change:e} at order {order})"
    )]
    NotConverged {
        bulk: usize,
        lo: f64,
        hi: f64,
        change: f64,
        order: usize,
    },
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre order must be positive");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Nodes `(x, weight)` of the cosine-substituted rule on `[lo, hi]`.
    pub fn edge_nodes(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        self.nodes.iter().zip(&self.weights).map(move |(t, w)| {
            let theta = 0.5 * PI * (t + 1.0);
            let x = mid - half * cos(theta);
            (x, w * 0.5 * PI * half * sin(theta))
        })
    }

    /// `∫_lo^hi f` with the cosine substitution that absorbs square-root
    /// behaviour at both ends.
    pub fn integrate_edges<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        self.edge_nodes(lo, hi).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Lazily built family of rules indexed like [`ORDERS`].
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<Option<GaussLegendre>>,
}

impl RuleSet {
    pub fn new() -> Self {
        Self {
            rules: alloc::vec![None; ORDERS.len()],
        }
    }

    pub fn rule(&mut self, index: usize) -> &GaussLegendre {
        if self.rules.is_empty() {
            self.rules = alloc::vec![None; ORDERS.len()];
        }
        self.rules[index].get_or_insert_with(|| GaussLegendre::new(ORDERS[index]))
    }

    /// Integrate with orders `hint, hint + 1, …` until two successive orders
    /// agree to `tol`, falling back to panel bisection in `θ` past
    /// [`PANEL_SWITCH`]. Returns the value and the order index to use as the
    /// next hint.
    pub fn integrate_edges_adaptive<F: FnMut(f64) -> f64>(
        &mut self,
        bulk: usize,
        lo: f64,
        hi: f64,
        hint: usize,
        tol: f64,
        mut f: F,
    ) -> Result<(f64, usize), QuadratureError> {
        let mut index = hint.min(PANEL_SWITCH - 1);
        let mut prev = self.rule(index).integrate_edges(lo, hi, &mut f);
        while index < PANEL_SWITCH {
            index += 1;
            let next = self.rule(index).integrate_edges(lo, hi, &mut f);
            if (next - prev).abs() <= tol {
                return Ok((next, index));
            }
            prev = next;
        }
        let v = self.integrate_panels(bulk, lo, hi, tol, f)?;
        Ok((v, PANEL_SWITCH))
    }

    fn integrate_panels<F: FnMut(f64) -> f64>(
        &mut self,
        bulk: usize,
        lo: f64,
        hi: f64,
        tol: f64,
        mut f: F,
    ) -> Result<f64, QuadratureError> {
        self.rule(PANEL_COARSE);
        self.rule(PANEL_COARSE + 1);
        let (Some(coarse), Some(fine)) = (&self.rules[PANEL_COARSE], &self.rules[PANEL_COARSE + 1]) else {
            unreachable!("panel rules are built above");
        };
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut g = |theta: f64| half * sin(theta) * f(mid - half * cos(theta));
        let mut stack = alloc::vec![(0.0, PI, 0u32)];
        let mut acc = 0.0;
        let mut panels = 0usize;
        let mut worst: f64 = 0.0;
        while let Some((a, b, depth)) = stack.pop() {
            let c = coarse.integrate(a, b, &mut g);
            let v = fine.integrate(a, b, &mut g);
            let err = (v - c).abs();
            panels += 1;
            if err <= tol * (b - a) / PI || depth >= MAX_PANEL_DEPTH {
                worst = worst.max(err);
                acc += v;
                continue;
            }
            if panels > MAX_PANELS {
                return Err(QuadratureError::NotConverged {
                    bulk,
                    lo,
                    hi,
                    change: err,
                    order: ORDERS[PANEL_COARSE + 1],
                });
            }
            let m = 0.5 * (a + b);
            stack.push((m, b, depth + 1));
            stack.push((a, m, depth + 1));
        }
        if worst > tol {
            return Err(QuadratureError::NotConverged {
                bulk,
                lo,
                hi,
                change: worst,
                order: ORDERS[PANEL_COARSE + 1],
            });
        }
        Ok(acc)
    }
}

/// Order index past which [`RuleSet::integrate_edges_adaptive`] switches to
/// panels.
pub const PANEL_SWITCH: usize = 4;
const PANEL_COARSE: usize = 0;
const MAX_PANEL_DEPTH: u32 = 40;
const MAX_PANELS: usize = 20_000;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(15) - 3.0 * x.powi(4));
        let exact = (2f64.powi(16) - 1.0) / 16.0 - 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn weights_sum_to_two() {
        for &n in &ORDERS {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-12, "n = {n}: {s}");
        }
    }

    #[test]
    fn semicircle_mass_and_variance() {
        let rule = GaussLegendre::new(32);
        let mass = rule.integrate_edges(-2.0, 2.0, |x| (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI));
        let var = rule.integrate_edges(-2.0, 2.0, |x| {
            x * x * (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI)
        });
        assert!((mass - 1.0).abs() < 1e-14);
        assert!((var - 1.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_reports_order() {
        let mut rules = RuleSet::new();
        let (v, idx) = rules
            .integrate_edges_adaptive(0, 0.0, 1.0, 0, 1e-12, |x| (x * (1.0 - x)).sqrt())
            .unwrap();
        assert!((v - PI / 8.0).abs() < 1e-13);
        assert!(idx >= 1);
    }
}
