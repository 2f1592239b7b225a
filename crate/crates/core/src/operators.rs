//! Spline-admissible operators: Green's functions, null spaces, growth
//! orders, and a finite-difference `apply` used to check them numerically.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// A location in the 1-D line or the 2-D plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Line(f64),
    Plane([f64; 2]),
}

impl Point {
    pub fn x(self) -> f64 {
        match self {
            Point::Line(x) => x,
            Point::Plane([x, _]) => x,
        }
    }

    pub fn y(self) -> f64 {
        match self {
            Point::Line(_) => 0.0,
            Point::Plane([_, y]) => y,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Point::Line(_) => 1,
            Point::Plane(_) => 2,
        }
    }

    pub fn norm(self) -> f64 {
        match self {
            Point::Line(x) => x.abs(),
            Point::Plane([x, y]) => x.hypot(y),
        }
    }

    /// `self - other`, keeping the dimension of `self`.
    pub fn minus(self, other: Point) -> Point {
        match self {
            Point::Line(x) => Point::Line(x - other.x()),
            Point::Plane([x, y]) => Point::Plane([x - other.x(), y - other.y()]),
        }
    }

    pub fn distance(self, other: Point) -> f64 {
        self.minus(other).norm()
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::Line(x)
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::Plane(p)
    }
}

/// Operator family and its parameters. This is also the serialized
/// descriptor of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `D^N`.
    Derivative { order: usize },
    /// `Π (D - α_i)` with real, non-positive roots `α_i`.
    ExponentialOde { roots: Vec<f64> },
    /// Fractional derivative with Fourier symbol `(jω)^γ`, `γ ≥ 1`.
    FractionalDerivative { gamma: f64 },
    /// Thin-plate operator in the plane, kernel `r² log r / (8π)`.
    ThinPlate2d,
    /// Measure mode: `L = I`.
    Identity,
}

/// `coef · x^power · e^(rate·x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct ExpTerm {
    coef: f64,
    power: u32,
    rate: f64,
}

impl ExpTerm {
    /// k-th derivative at `x`.
    fn derivative(&self, x: f64, k: u32) -> f64 {
        let e = (self.rate * x).exp();
        let mut s = 0.0;
        let mut binom = 1.0;
        let mut falling = 1.0;
        for i in 0..=k.min(self.power) {
            if i > 0 {
                binom *= (k - i + 1) as f64 / i as f64;
                falling *= (self.power - i + 1) as f64;
            }
            s += binom * falling * x.powi((self.power - i) as i32) * self.rate.powi((k - i) as i32);
        }
        self.coef * s * e
    }
}

/// A spline-admissible operator together with its derived constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorKind", into = "OperatorKind")]
pub struct SplineAdmissibleOperator {
    kind: OperatorKind,
    dimension: usize,
    growth_order: i32,
    nullspace_dim: usize,
    holder_exponent: f64,
    /// Causal Green's function `H(x) Σ terms` for the ODE families.
    green_terms: Vec<ExpTerm>,
}

impl TryFrom<OperatorKind> for SplineAdmissibleOperator {
    type Error = Error;
    fn try_from(kind: OperatorKind) -> Result<Self> {
        Self::new(kind)
    }
}

impl From<SplineAdmissibleOperator> for OperatorKind {
    fn from(op: SplineAdmissibleOperator) -> Self {
        op.kind
    }
}

impl fmt::Display for SplineAdmissibleOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            OperatorKind::Derivative { order: 1 } => write!(f, "D"),
            OperatorKind::Derivative { order } => write!(f, "D^{order}"),
            OperatorKind::ExponentialOde { roots } => {
                for r in roots {
                    if *r == 0.0 {
                        write!(f, "D")?;
                    } else {
                        write!(f, "(D{:+})", -r)?;
                    }
                }
                Ok(())
            }
            OperatorKind::FractionalDerivative { gamma } => write!(f, "D^{gamma}"),
            OperatorKind::ThinPlate2d => write!(f, "thin-plate"),
            OperatorKind::Identity => write!(f, "I"),
        }
    }
}

impl SplineAdmissibleOperator {
    pub fn new(kind: OperatorKind) -> Result<Self> {
        let op = match &kind {
            OperatorKind::Derivative { order } => {
                let n = *order;
                if n == 0 || n > 12 {
                    return Err(Error::InvalidOperator(format!("derivative order must be in 1..=12, got {n}")));
                }
                Self {
                    dimension: 1,
                    growth_order: n as i32 - 1,
                    nullspace_dim: n,
                    holder_exponent: (n - 1) as f64,
                    green_terms: vec![ExpTerm {
                        coef: 1.0 / factorial(n - 1),
                        power: (n - 1) as u32,
                        rate: 0.0,
                    }],
                    kind,
                }
            }
            OperatorKind::ExponentialOde { roots } => {
                if roots.is_empty() || roots.len() > 12 {
                    return Err(Error::InvalidOperator("exponential operator needs 1..=12 roots".into()));
                }
                if let Some(r) = roots.iter().find(|r| !r.is_finite() || **r > 0.0) {
                    return Err(Error::InvalidOperator(format!(
                        "roots must be finite and non-positive for a slowly growing causal Green's function, got {r}"
                    )));
                }
                let zero_mult = roots.iter().filter(|r| **r == 0.0).count();
                Self {
                    dimension: 1,
                    growth_order: zero_mult.saturating_sub(1) as i32,
                    nullspace_dim: roots.len(),
                    holder_exponent: (roots.len() - 1) as f64,
                    green_terms: partial_fractions(roots),
                    kind,
                }
            }
            OperatorKind::FractionalDerivative { gamma } => {
                let g = *gamma;
                if !(g.is_finite() && (1.0..=12.0).contains(&g)) {
                    return Err(Error::InvalidOperator(format!(
                        "fractional order must lie in [1, 12] for a locally bounded Green's function, got {g}"
                    )));
                }
                let n0 = g.ceil() as usize;
                Self {
                    dimension: 1,
                    growth_order: n0 as i32 - 1,
                    nullspace_dim: n0,
                    holder_exponent: g - 1.0,
                    green_terms: Vec::new(),
                    kind,
                }
            }
            OperatorKind::ThinPlate2d => Self {
                dimension: 2,
                growth_order: 3,
                nullspace_dim: 3,
                holder_exponent: 1.0,
                green_terms: Vec::new(),
                kind,
            },
            OperatorKind::Identity => Self {
                dimension: 1,
                growth_order: -1,
                nullspace_dim: 0,
                holder_exponent: 0.0,
                green_terms: Vec::new(),
                kind,
            },
        };
        Ok(op)
    }

    pub fn derivative(order: usize) -> Result<Self> {
        Self::new(OperatorKind::Derivative { order })
    }

    pub fn exponential(roots: Vec<f64>) -> Result<Self> {
        Self::new(OperatorKind::ExponentialOde { roots })
    }

    pub fn fractional(gamma: f64) -> Result<Self> {
        Self::new(OperatorKind::FractionalDerivative { gamma })
    }

    pub fn thin_plate() -> Self {
        Self::new(OperatorKind::ThinPlate2d).expect("thin-plate operator is always valid")
    }

    pub fn identity() -> Self {
        Self::new(OperatorKind::Identity).expect("identity operator is always valid")
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `n₀`; `-1` for the identity, which has no growth constraint.
    pub fn growth_order(&self) -> i32 {
        self.growth_order
    }

    pub fn nullspace_dim(&self) -> usize {
        self.nullspace_dim
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, OperatorKind::Identity)
    }

    /// Green's function vanishes on the negative half-line.
    pub fn is_causal(&self) -> bool {
        matches!(
            self.kind,
            OperatorKind::Derivative { .. } | OperatorKind::ExponentialOde { .. } | OperatorKind::FractionalDerivative { .. }
        )
    }

    /// `D^N` for some `N`, including integer fractional orders.
    pub fn polynomial_order(&self) -> Option<usize> {
        match self.kind {
            OperatorKind::Derivative { order } => Some(order),
            _ => None,
        }
    }

    fn check_dim(&self, x: Point) -> Result<()> {
        if x.dim() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "{}-D point for a {}-D operator",
                x.dim(),
                self.dimension
            )));
        }
        Ok(())
    }

    /// Green's function `ρ_L(x)`. Causal kernels use the right-continuous
    /// step, so `ρ_D(0) = 1`.
    pub fn green_eval(&self, x: impl Into<Point>) -> Result<f64> {
        let x = x.into();
        if self.is_identity() {
            return Err(Error::IdentityHasNoGreenFunction);
        }
        self.check_dim(x)?;
        Ok(match &self.kind {
            OperatorKind::Derivative { .. } | OperatorKind::ExponentialOde { .. } => {
                let t = x.x();
                if t < 0.0 {
                    0.0
                } else {
                    self.green_terms.iter().map(|term| term.derivative(t, 0)).sum()
                }
            }
            OperatorKind::FractionalDerivative { gamma: g } => {
                let t = x.x();
                if t < 0.0 {
                    0.0
                } else if *g == 1.0 {
                    1.0
                } else {
                    t.powf(g - 1.0) / gamma(*g)
                }
            }
            OperatorKind::ThinPlate2d => {
                let r = x.norm();
                if r == 0.0 {
                    0.0
                } else {
                    r * r * r.ln() / (8.0 * std::f64::consts::PI)
                }
            }
            OperatorKind::Identity => unreachable!(),
        })
    }

    /// k-th derivative of the Green's function at `x` (1-D). At the origin
    /// the right limit is returned, matching the step convention.
    pub fn green_derivative(&self, x: f64, k: u32) -> Result<f64> {
        match &self.kind {
            OperatorKind::Identity => Err(Error::IdentityHasNoGreenFunction),
            OperatorKind::ThinPlate2d => Err(Error::UnsupportedOperator(
                "point derivatives of the thin-plate kernel".into(),
            )),
            OperatorKind::Derivative { order } => {
                let n0 = (*order - 1) as u32;
                if k > n0 {
                    return Err(Error::InadmissibleFunctional(format!(
                        "derivative of order {k} of a Green's function with {n0} continuous derivatives"
                    )));
                }
                if x < 0.0 {
                    return Ok(0.0);
                }
                let p = n0 - k;
                Ok(x.powi(p as i32) / factorial(p as usize))
            }
            OperatorKind::ExponentialOde { roots } => {
                let n0 = (roots.len() - 1) as u32;
                if k > n0 {
                    return Err(Error::InadmissibleFunctional(format!(
                        "derivative of order {k} of a Green's function with {n0} continuous derivatives"
                    )));
                }
                if x < 0.0 {
                    return Ok(0.0);
                }
                Ok(self.green_terms.iter().map(|t| t.derivative(x, k)).sum())
            }
            OperatorKind::FractionalDerivative { gamma: g } => {
                let e = g - 1.0 - k as f64;
                if x < 0.0 {
                    return Ok(0.0);
                }
                if e < 0.0 && x == 0.0 {
                    return Err(Error::InadmissibleFunctional(format!(
                        "derivative of order {k} of x^{} is singular at the origin",
                        g - 1.0
                    )));
                }
                if e == 0.0 {
                    return Ok(1.0);
                }
                if (g - k as f64) <= 0.0 && (g - k as f64).fract() == 0.0 {
                    // 1/Γ at a non-positive integer.
                    return Ok(0.0);
                }
                Ok(x.powf(e) / gamma(g - k as f64))
            }
        }
    }

    /// Basis of the growth-restricted null space.
    pub fn nullspace_basis(&self) -> NullSpaceBasis {
        let functions = match &self.kind {
            OperatorKind::Derivative { order } => (0..*order).map(|n| NullFunction::monomial(n as u32)).collect(),
            OperatorKind::FractionalDerivative { .. } => (0..self.nullspace_dim)
                .map(|n| NullFunction::monomial(n as u32))
                .collect(),
            OperatorKind::ExponentialOde { roots } => {
                let mut out = Vec::new();
                for (rate, mult) in group_roots(roots) {
                    for j in 0..mult {
                        out.push(NullFunction {
                            terms: vec![NullTerm {
                                coef: 1.0 / factorial(j),
                                px: j as u32,
                                py: 0,
                                rate,
                            }],
                        });
                    }
                }
                out
            }
            OperatorKind::ThinPlate2d => vec![
                NullFunction::single(1.0, 0, 0),
                NullFunction::single(1.0, 1, 0),
                NullFunction::single(1.0, 0, 1),
            ],
            OperatorKind::Identity => Vec::new(),
        };
        NullSpaceBasis { functions }
    }

    /// Finite-difference approximation of `L f` from samples on a uniform
    /// 1-D grid with step `h`.
    ///
    /// ODE operators use one exact exponential difference per root,
    /// `(f[i+1] - e^{αh} f[i]) / h`, so the output has `len - N` entries and
    /// entry `i` sits at `x_i + N h / 2`. Fractional operators use
    /// Grünwald-Letnikov weights truncated at the left end of the grid
    /// (output length `len`). The identity returns the samples.
    pub fn apply_operator_fd(&self, samples: &[f64], h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        let rates: Vec<f64> = match &self.kind {
            OperatorKind::Derivative { order } => vec![0.0; *order],
            OperatorKind::ExponentialOde { roots } => roots.clone(),
            OperatorKind::FractionalDerivative { gamma: g } => {
                if samples.len() < 2 {
                    return Err(Error::GridTooShort { len: samples.len(), needed: 2 });
                }
                return Ok(grunwald_letnikov(samples, *g, h));
            }
            OperatorKind::Identity => return Ok(samples.to_vec()),
            OperatorKind::ThinPlate2d => {
                return Err(Error::DimensionMismatch(
                    "thin-plate operator needs a 2-D grid (see apply_operator_fd_2d)".into(),
                ))
            }
        };
        let needed = rates.len() + 1;
        if samples.len() < needed {
            return Err(Error::GridTooShort { len: samples.len(), needed });
        }
        let mut v = samples.to_vec();
        for rate in rates {
            let decay = (rate * h).exp();
            v = v.windows(2).map(|w| (w[1] - decay * w[0]) / h).collect();
        }
        Ok(v)
    }

    /// Biharmonic 13-point stencil `Δ_h Δ_h` on a 2-D grid (`rows[iy][ix]`),
    /// returning the interior `(ny - 4) × (nx - 4)` block.
    pub fn apply_operator_fd_2d(&self, rows: &[Vec<f64>], h: f64) -> Result<Vec<Vec<f64>>> {
        match self.kind {
            OperatorKind::ThinPlate2d => {}
            OperatorKind::Identity => return Ok(rows.to_vec()),
            _ => return Err(Error::DimensionMismatch("2-D stencil on a 1-D operator".into())),
        }
        let ny = rows.len();
        let nx = rows.first().map_or(0, Vec::len);
        if ny < 5 || nx < 5 {
            return Err(Error::GridTooShort { len: ny.min(nx), needed: 5 });
        }
        let lap = |g: &dyn Fn(usize, usize) -> f64, i: usize, j: usize| {
            (g(i + 1, j) + g(i - 1, j) + g(i, j + 1) + g(i, j - 1) - 4.0 * g(i, j)) / (h * h)
        };
        let first: Vec<Vec<f64>> = (1..ny - 1)
            .map(|i| (1..nx - 1).map(|j| lap(&|a, b| rows[a][b], i, j)).collect())
            .collect();
        Ok((1..ny - 3)
            .map(|i| (1..nx - 3).map(|j| lap(&|a, b| first[a][b], i, j)).collect())
            .collect())
    }
}

fn grunwald_letnikov(samples: &[f64], g: f64, h: f64) -> Vec<f64> {
    let n = samples.len();
    let mut w = vec![1.0; n];
    for k in 1..n {
        w[k] = w[k - 1] * (1.0 - (g + 1.0) / k as f64);
    }
    let scale = h.powf(-g);
    (0..n)
        .map(|i| scale * (0..=i).map(|k| w[k] * samples[i - k]).sum::<f64>())
        .collect()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Distinct roots with multiplicities, in order of first appearance.
fn group_roots(roots: &[f64]) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &r in roots {
        match out.iter_mut().find(|(v, _)| *v == r) {
            Some((_, m)) => *m += 1,
            None => out.push((r, 1)),
        }
    }
    out
}

/// Partial fractions of `1 / Π (s - r_i)` turned into the causal impulse
/// response `Σ_k Σ_j c_kj x^{j-1}/(j-1)! e^{r_k x}`.
fn partial_fractions(roots: &[f64]) -> Vec<ExpTerm> {
    let groups = group_roots(roots);
    let mut terms = Vec::new();
    for (k, &(rk, mk)) in groups.iter().enumerate() {
        // Taylor series in t of Π_{l≠k} (rk - rl + t)^{-ml}, up to t^{mk-1}.
        let mut series = vec![0.0; mk];
        series[0] = 1.0;
        for (l, &(rl, ml)) in groups.iter().enumerate() {
            if l == k {
                continue;
            }
            let d = rk - rl;
            let inv: Vec<f64> = (0..mk).map(|i| (-1f64).powi(i as i32) / d.powi(i as i32 + 1)).collect();
            for _ in 0..ml {
                series = (0..mk)
                    .map(|n| (0..=n).map(|i| series[i] * inv[n - i]).sum())
                    .collect();
            }
        }
        for j in 1..=mk {
            let c = series[mk - j];
            if c != 0.0 {
                terms.push(ExpTerm {
                    coef: c / factorial(j - 1),
                    power: (j - 1) as u32,
                    rate: rk,
                });
            }
        }
    }
    terms
}

/// `coef · x^px · y^py · e^(rate·x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullTerm {
    pub coef: f64,
    pub px: u32,
    pub py: u32,
    pub rate: f64,
}

/// An element of the null space, as a finite sum of exponential monomials.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NullFunction {
    pub terms: Vec<NullTerm>,
}

impl NullFunction {
    /// `x^n / n!`.
    pub fn monomial(n: u32) -> Self {
        Self::single(1.0 / factorial(n as usize), n, 0)
    }

    fn single(coef: f64, px: u32, py: u32) -> Self {
        Self {
            terms: vec![NullTerm { coef, px, py, rate: 0.0 }],
        }
    }

    pub fn eval(&self, p: impl Into<Point>) -> f64 {
        let p = p.into();
        let (x, y) = (p.x(), p.y());
        self.terms
            .iter()
            .map(|t| t.coef * x.powi(t.px as i32) * y.powi(t.py as i32) * (t.rate * x).exp())
            .sum()
    }

    /// k-th derivative in x at a 1-D point.
    pub fn derivative(&self, x: f64, k: u32) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.py == 0)
            .map(|t| {
                ExpTerm {
                    coef: t.coef,
                    power: t.px,
                    rate: t.rate,
                }
                .derivative(x, k)
            })
            .sum()
    }

    /// `Σ c_n f_n`.
    pub fn combine(coeffs: &[f64], functions: &[NullFunction]) -> NullFunction {
        let terms = coeffs
            .iter()
            .zip(functions)
            .flat_map(|(&c, f)| f.terms.iter().map(move |t| NullTerm { coef: c * t.coef, ..*t }))
            .filter(|t| t.coef != 0.0)
            .collect();
        NullFunction { terms }
    }
}

/// `p_1, …, p_{N₀}`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NullSpaceBasis {
    pub functions: Vec<NullFunction>,
}

impl NullSpaceBasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn eval(&self, n: usize, p: impl Into<Point>) -> f64 {
        self.functions[n].eval(p)
    }

    /// `Σ c_n p_n(x)`.
    pub fn eval_combination(&self, coeffs: &[f64], p: impl Into<Point>) -> f64 {
        let p = p.into();
        coeffs.iter().zip(&self.functions).map(|(c, f)| c * f.eval(p)).sum()
    }
}
