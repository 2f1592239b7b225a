//! Panel Gauss-Legendre quadrature with user-supplied breakpoints.
//!
//! Kernels in this crate are piecewise smooth with known kink locations
//! (knots, aperture edges), so integrals are split there first and each
//! smooth piece is refined adaptively.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes per panel.
pub const GAUSS_NODES: usize = 32;

const MAX_DEPTH: u32 = 40;

/// Quadrature settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Absolute tolerance for the whole integral.
    pub tol: f64,
    /// Uniform panels per smooth piece before adaptive refinement.
    pub panels: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            panels: 1,
        }
    }
}

impl QuadratureRule {
    pub fn with_panels(panels: usize) -> Self {
        Self {
            panels: panels.max(1),
            ..Self::default()
        }
    }
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_nodes(GAUSS_NODES))
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm1) = if n == 0 { (1.0, 0.0) } else if n == 1 { (x, 1.0) } else { (p1, p0) };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// One fixed Gauss-Legendre panel on [a, b].
pub fn gauss_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(&t, &w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = gauss_panel(f, a, m);
    let right = gauss_panel(f, m, b);
    let refined = left + right;
    if (refined - whole).abs() <= tol || (b - a) <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
        return Ok(refined);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::QuadratureFailure { lo: a, hi: b });
    }
    Ok(adaptive(f, a, m, left, 0.5 * tol, depth + 1)? + adaptive(f, m, b, right, 0.5 * tol, depth + 1)?)
}

/// Integrates `f` over [lo, hi], splitting at every breakpoint that falls
/// strictly inside the interval.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    rule: QuadratureRule,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::QuadratureFailure { lo, hi });
    }
    if hi <= lo {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&t| t > lo && t < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = (cuts.len() - 1) * rule.panels.max(1);
    let panel_tol = rule.tol / pieces as f64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = rule.panels.max(1);
        let step = (b - a) / n as f64;
        for k in 0..n {
            let pa = a + step * k as f64;
            let pb = if k + 1 == n { b } else { a + step * (k + 1) as f64 };
            let whole = gauss_panel(&f, pa, pb);
            total += adaptive(&f, pa, pb, whole, panel_tol, 0)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_two_and_nodes_are_symmetric() {
        let (x, w) = legendre_nodes(GAUSS_NODES);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        for i in 0..GAUSS_NODES {
            assert_abs_diff_eq!(x[i], -x[GAUSS_NODES - 1 - i], epsilon = 1e-15);
        }
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let v = integrate(|x| x.powi(40), 0.0, 1.0, &[], QuadratureRule::default()).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 41.0, epsilon = 1e-14);
    }

    #[test]
    fn kinks_are_handled_by_breakpoints() {
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], QuadratureRule::default()).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (0.09 + 0.49), epsilon = 1e-14);
    }

    #[test]
    fn singular_derivative_converges_adaptively() {
        let v = integrate(|x: f64| x.sqrt(), 0.0, 4.0, &[], QuadratureRule::default()).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0 * 8.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|_| 1.0, 1.0, 1.0, &[], QuadratureRule::default()).unwrap(), 0.0);
    }
}
