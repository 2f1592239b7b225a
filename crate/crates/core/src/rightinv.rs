//! The stable right inverse `L_φ⁻¹` with kernel
//! `g_φ(x, y) = ρ_L(x - y) - Σ p_n(x) q_n(y)`, `q_n(y) = ⟨φ_n, ρ_L(· - y)⟩`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biortho::{canonical_system, BiorthogonalSystem};
use crate::error::{Error, Result};
use crate::operators::{factorial, Point, SplineAdmissibleOperator};
use crate::spline::NonuniformSpline;

/// Growth factor between nested boxes above which a kernel is declared
/// unstable.
pub const UNSTABLE_GROWTH: f64 = 10.0;

/// A finite Dirac train `Σ w_k δ(· - y_k)`, sorted by location with
/// coincident atoms merged and zero weights dropped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Point, f64)>", into = "Vec<(Point, f64)>")]
pub struct DiscreteMeasure {
    atoms: Vec<(Point, f64)>,
}

impl TryFrom<Vec<(Point, f64)>> for DiscreteMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<(Point, f64)>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<DiscreteMeasure> for Vec<(Point, f64)> {
    fn from(m: DiscreteMeasure) -> Self {
        m.atoms
    }
}

fn point_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    a.x().total_cmp(&b.x()).then(a.y().total_cmp(&b.y()))
}

impl DiscreteMeasure {
    pub fn new(mut atoms: Vec<(Point, f64)>) -> Result<Self> {
        if let Some(&(p, _)) = atoms.first() {
            if atoms.iter().any(|a| a.0.dim() != p.dim()) {
                return Err(Error::DimensionMismatch("atoms of mixed dimension".into()));
            }
        }
        if atoms.iter().any(|(p, w)| !w.is_finite() || !p.x().is_finite() || !p.y().is_finite()) {
            return Err(Error::InvalidInput("non-finite atom".into()));
        }
        atoms.sort_by(|a, b| point_cmp(&a.0, &b.0));
        let mut merged: Vec<(Point, f64)> = Vec::with_capacity(atoms.len());
        for (p, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += w,
                _ => merged.push((p, w)),
            }
        }
        merged.retain(|a| a.1 != 0.0);
        Ok(Self { atoms: merged })
    }

    pub(crate) fn from_sorted(atoms: Vec<(Point, f64)>) -> Self {
        Self { atoms }
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `‖w‖_M = Σ |w_k|`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().fold(0.0, |acc, a| acc + a.1.abs())
    }
}

/// `L_φ⁻¹` for a fixed biorthogonal system.
#[derive(Clone, Debug)]
pub struct RightInverse {
    system: BiorthogonalSystem,
    closed_form: Option<usize>,
}

impl RightInverse {
    pub fn new(system: BiorthogonalSystem) -> Result<Self> {
        if system.operator().is_identity() {
            return Err(Error::IdentityHasNoGreenFunction);
        }
        let closed_form = if system.is_canonical_derivative() {
            Some(system.len() - 1)
        } else {
            None
        };
        Ok(Self { system, closed_form })
    }

    /// Right inverse for the canonical boundary functionals of `op`.
    pub fn canonical(op: &SplineAdmissibleOperator) -> Result<Self> {
        Self::new(canonical_system(op)?)
    }

    pub fn system(&self) -> &BiorthogonalSystem {
        &self.system
    }

    pub fn operator(&self) -> &SplineAdmissibleOperator {
        self.system.operator()
    }

    /// `(q_1(y), …, q_{N₀}(y))`.
    pub fn q(&self, y: impl Into<Point>) -> Result<Vec<f64>> {
        let y = y.into();
        let op = self.system.operator();
        self.system.functionals().iter().map(|phi| phi.pair_atom(op, y)).collect()
    }

    /// `g_φ(x, y)`, in closed form when one is known.
    pub fn kernel_eval(&self, x: impl Into<Point>, y: impl Into<Point>) -> Result<f64> {
        let (x, y) = (x.into(), y.into());
        match self.kernel_closed_form(x, y) {
            Some(v) => Ok(v),
            None => self.kernel_subtraction(x, y),
        }
    }

    /// `ρ_L(x - y) - Σ p_n(x) q_n(y)`.
    pub fn kernel_subtraction(&self, x: impl Into<Point>, y: impl Into<Point>) -> Result<f64> {
        let (x, y) = (x.into(), y.into());
        let q = self.q(y)?;
        self.kernel_with_q(x, y, &q)
    }

    pub(crate) fn kernel_with_q(&self, x: Point, y: Point, q: &[f64]) -> Result<f64> {
        let rho = self.system.operator().green_eval(x.minus(y))?;
        Ok(rho - self.system.basis().eval_combination(q, x))
    }

    /// Piecewise form for `D^N` with `φ_n(f) = f^{(n-1)}(0)`:
    /// `(x-y)^{n₀}/n₀!` on `0 < y ≤ x`, `-(x-y)^{n₀}/n₀!` on `x < y ≤ 0`,
    /// zero elsewhere.
    pub fn kernel_closed_form(&self, x: impl Into<Point>, y: impl Into<Point>) -> Option<f64> {
        let n0 = self.closed_form?;
        let (x, y) = (x.into(), y.into());
        if x.dim() != 1 || y.dim() != 1 {
            return None;
        }
        let (x, y) = (x.x(), y.x());
        let mono = |t: f64| t.powi(n0 as i32) / factorial(n0);
        Some(if x >= 0.0 {
            if y > 0.0 && y <= x {
                mono(x - y)
            } else {
                0.0
            }
        } else if y > x && y <= 0.0 {
            -mono(x - y)
        } else {
            0.0
        })
    }

    /// `L_φ⁻¹ w = Σ w_k g_φ(·, y_k)`, returned as a spline whose null part
    /// is `-Σ_k w_k q(y_k)`.
    pub fn apply(&self, w: &DiscreteMeasure) -> Result<NonuniformSpline> {
        let n0 = self.system.len();
        let mut c = vec![0.0; n0];
        for &(y, wk) in w.atoms() {
            for (cn, qn) in c.iter_mut().zip(self.q(y)?) {
                *cn -= wk * qn;
            }
        }
        NonuniformSpline::from_innovation(self.system.operator().clone(), w, c)
    }

    /// The solution of `L s = w` with `φ(s) = b`.
    pub fn solve_ode(&self, w: &DiscreteMeasure, b: &[f64]) -> Result<NonuniformSpline> {
        if b.len() != self.system.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} boundary values for N0 = {}",
                b.len(),
                self.system.len()
            )));
        }
        let base = self.apply(w)?;
        let coeffs: Vec<f64> = base.null_coeffs().iter().zip(b).map(|(c, bn)| c + bn).collect();
        NonuniformSpline::from_innovation(self.system.operator().clone(), w, coeffs)
    }

    /// `φ(s)` for a spline of the same operator.
    pub fn boundary_values(&self, s: &NonuniformSpline) -> Result<Vec<f64>> {
        let op = self.system.operator();
        let basis = &self.system.basis().functions;
        self.system
            .functionals()
            .iter()
            .map(|phi| {
                let mut v = 0.0;
                for (&k, &a) in s.knots().iter().zip(s.weights()) {
                    v += a * phi.pair_atom(op, k)?;
                }
                for (&b, p) in s.null_coeffs().iter().zip(basis) {
                    v += b * phi.act_on_null(p)?;
                }
                Ok(v)
            })
            .collect()
    }

    /// Grid estimate of `sup |g_φ(x, y)| (1 + |x|)^{-n₀}` over `[lo, hi]²`.
    pub fn stability_constant(&self, lo: f64, hi: f64, step: f64) -> Result<StabilityEstimate> {
        if self.system.operator().dimension() != 1 {
            return Err(Error::UnsupportedOperator("stability estimate on 2-D kernels".into()));
        }
        let ys = axis(lo, hi, step)?;
        let qs: Vec<Vec<f64>> = ys.iter().map(|&y| self.q(y)).collect::<Result<_>>()?;
        let table = Kernel::<fn(f64, f64) -> f64>::Tabulated {
            ri: self,
            qs: &qs,
        };
        let n0 = self.system.operator().growth_order();
        let (value, argmax) = grid_sup(&table, n0, lo, hi, step)?;
        let analytic = self.closed_form.map(|n0| 1.0 / factorial(n0));
        Ok(StabilityEstimate {
            value,
            argmax,
            lo,
            hi,
            step,
            analytic,
        })
    }

    /// Growth of the grid sup from `[-inner, inner]²` to `[-outer, outer]²`.
    pub fn growth(&self, inner: f64, outer: f64, step: f64) -> Result<GrowthCheck> {
        let a = self.stability_constant(-inner, inner, step)?.value;
        let b = self.stability_constant(-outer, outer, step)?.value;
        Ok(GrowthCheck::new(a, b))
    }
}

/// Grid lower bound on the stability constant `C_φ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityEstimate {
    pub value: f64,
    pub argmax: (f64, f64),
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Exact sup over the whole plane when known.
    pub analytic: Option<f64>,
}

/// Weighted sup on an inner and an outer box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub inner: f64,
    pub outer: f64,
    pub ratio: f64,
}

impl GrowthCheck {
    pub fn new(inner: f64, outer: f64) -> Self {
        let ratio = if inner > 0.0 { outer / inner } else if outer > 0.0 { f64::INFINITY } else { 1.0 };
        Self { inner, outer, ratio }
    }

    pub fn is_unstable(&self) -> bool {
        self.ratio >= UNSTABLE_GROWTH
    }
}

enum Kernel<'a, F> {
    Tabulated {
        ri: &'a RightInverse,
        qs: &'a [Vec<f64>],
    },
    Plain(F),
}

fn axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::InvalidInput(format!("bad box [{lo}, {hi}] with step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

fn grid_sup<F: Fn(f64, f64) -> f64 + Sync>(
    kernel: &Kernel<'_, F>,
    n0: i32,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<(f64, (f64, f64))> {
    let xs = axis(lo, hi, step)?;
    let ys = axis(lo, hi, step)?;
    let rows: Vec<(f64, (f64, f64))> = xs
        .par_iter()
        .map(|&x| {
            let w = (1.0 + x.abs()).powi(-n0.max(0));
            let mut best = (0.0, (x, ys[0]));
            for (j, &y) in ys.iter().enumerate() {
                let g = match kernel {
                    Kernel::Tabulated { ri, qs } => ri.kernel_with_q(Point::Line(x), Point::Line(y), &qs[j])?,
                    Kernel::Plain(f) => f(x, y),
                };
                let v = g.abs() * w;
                if v > best.0 {
                    best = (v, (x, y));
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(rows
        .into_iter()
        .fold((0.0, (lo, lo)), |acc, r| if r.0 > acc.0 { r } else { acc }))
}

/// Grid sup of `|g(x, y)| (1 + |x|)^{-n₀}` for an arbitrary kernel.
pub fn kernel_grid_sup(
    kernel: impl Fn(f64, f64) -> f64 + Sync,
    n0: i32,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<StabilityEstimate> {
    let (value, argmax) = grid_sup(&Kernel::Plain(kernel), n0, lo, hi, step)?;
    Ok(StabilityEstimate {
        value,
        argmax,
        lo,
        hi,
        step,
        analytic: None,
    })
}

/// Growth check for an arbitrary kernel on `[-inner, inner]²` and
/// `[-outer, outer]²`.
pub fn kernel_growth(
    kernel: impl Fn(f64, f64) -> f64 + Sync,
    n0: i32,
    inner: f64,
    outer: f64,
    step: f64,
) -> Result<GrowthCheck> {
    let a = kernel_grid_sup(&kernel, n0, -inner, inner, step)?.value;
    let b = kernel_grid_sup(&kernel, n0, -outer, outer, step)?.value;
    Ok(GrowthCheck::new(a, b))
}

/// The uncorrected convolution kernel `ρ_L(x - y)`.
pub fn shift_invariant_kernel(op: &SplineAdmissibleOperator) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
    move |x, y| op.green_eval(x - y).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biortho::measurement_system;
    use crate::linalg::{norm2, Matrix};
    use crate::measurements::Functional;
    use crate::quadrature::{integrate, QuadratureRule};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(n: usize) -> SplineAdmissibleOperator {
        SplineAdmissibleOperator::derivative(n).unwrap()
    }

    fn measure(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.iter().map(|&(x, w)| (Point::Line(x), w)).collect()).unwrap()
    }

    #[test]
    fn first_order_kernel_is_an_indicator() {
        let ri = RightInverse::canonical(&d(1)).unwrap();
        assert_eq!(ri.kernel_eval(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(ri.kernel_eval(2.0, 3.0).unwrap(), 0.0);
        assert_eq!(ri.kernel_eval(-2.0, -1.0).unwrap(), -1.0);
        assert_eq!(ri.kernel_subtraction(2.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn second_order_kernel_peaks_at_origin() {
        let ri = RightInverse::canonical(&d(2)).unwrap();
        let at0 = ri.kernel_eval(3.0, 1e-12).unwrap();
        assert_abs_diff_eq!(at0, 3.0, epsilon = 1e-11);
        let sup = (1..=3000)
            .map(|i| ri.kernel_eval(3.0, -4.0 + 0.0025 * i as f64).unwrap().abs())
            .fold(0.0, f64::max);
        assert!(sup <= 3.0);
        assert_abs_diff_eq!(sup, 3.0, epsilon = 0.0026);
    }

    #[test]
    fn closed_form_matches_subtraction() {
        for n in 1..=4 {
            let ri = RightInverse::canonical(&d(n)).unwrap();
            for i in 0..100 {
                for j in 0..100 {
                    let x = -5.0 + 0.1 * i as f64 + 0.0123;
                    let y = -5.0 + 0.1 * j as f64;
                    let a = ri.kernel_closed_form(x, y).unwrap();
                    let b = ri.kernel_subtraction(x, y).unwrap();
                    let scale = 1.0 + x.abs().max(y.abs()).powi(n as i32 - 1);
                    assert!((a - b).abs() <= 1e-12 * scale, "N={n} x={x} y={y}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn kernel_vanishes_far_left_in_y() {
        let ri = RightInverse::canonical(&d(3)).unwrap();
        for y in [-50.0, -10.0, 10.0, 50.0] {
            assert_eq!(ri.kernel_subtraction(1.0, y).unwrap(), 0.0);
        }
    }

    #[test]
    fn stability_constants() {
        let ri = RightInverse::canonical(&d(1)).unwrap();
        for half in [1.0, 4.0] {
            let est = ri.stability_constant(-half, half, 0.05).unwrap();
            assert_eq!(est.value, 1.0);
        }
        let ri = RightInverse::canonical(&d(2)).unwrap();
        let est = ri.stability_constant(-10.0, 10.0, 0.05).unwrap();
        // oracle: sup over the grid of |x| / (1 + |x|) with y next to 0
        let want = (10.0 - 0.05) / (1.0 + 10.0 - 0.05);
        assert!(est.value < 1.0);
        assert!(est.value <= 10.0 / 11.0 + 1e-12);
        assert!(est.value >= want - 1e-12, "{}", est.value);
        assert_eq!(est.analytic, Some(1.0));
    }

    #[test]
    fn shift_invariant_kernel_grows_with_the_box() {
        let op = d(2);
        let k = shift_invariant_kernel(&op);
        let sizes = [2.0, 4.0, 8.0, 16.0];
        let sups: Vec<f64> = sizes
            .iter()
            .map(|&r| kernel_grid_sup(&k, 1, -r, r, 0.1).unwrap().value)
            .collect();
        for (w, r) in sups.windows(2).zip(&sizes) {
            assert!(w[1] > w[0] * 1.5, "{sups:?} at {r}");
        }
        let stable = RightInverse::canonical(&op).unwrap().growth(5.0, 10.0, 0.05).unwrap();
        assert!(stable.ratio < 1.2);
        assert!(!stable.is_unstable());
    }

    #[test]
    fn apply_to_measures() {
        let ri = RightInverse::canonical(&d(1)).unwrap();
        let f = ri.apply(&measure(&[(1.0, 1.0)])).unwrap();
        for x in [0.0, 0.5, 0.999, 1.0, 1.5, 10.0] {
            assert_eq!(f.eval(x), if x >= 1.0 { 1.0 } else { 0.0 });
        }
        let zero = ri.apply(&DiscreteMeasure::default()).unwrap();
        assert_eq!(zero.eval(3.0), 0.0);

        let ri = RightInverse::canonical(&d(2)).unwrap();
        let f = ri.apply(&measure(&[(1.0, -2.0)])).unwrap();
        for i in 0..50 {
            let x = -2.0 + 0.1 * i as f64;
            let want = -2.0 * f64::max(x - 1.0, 0.0);
            assert_abs_diff_eq!(f.eval(x), want, epsilon = 1e-14);
        }
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.derivative(0.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn ode_solutions() {
        let ri = RightInverse::canonical(&d(1)).unwrap();
        let s = ri.solve_ode(&DiscreteMeasure::default(), &[5.0]).unwrap();
        assert_eq!(s.eval(-3.0), 5.0);
        assert_eq!(s.eval(8.0), 5.0);
        assert!(matches!(
            ri.solve_ode(&DiscreteMeasure::default(), &[1.0, 2.0]),
            Err(Error::DimensionMismatch(_))
        ));

        let ri = RightInverse::canonical(&d(2)).unwrap();
        let s = ri.solve_ode(&measure(&[(1.0, -2.0)]), &[0.0, 1.0]).unwrap();
        for i in 0..50 {
            let x = -1.0 + 0.08 * i as f64;
            assert_abs_diff_eq!(s.eval(x), x - 2.0 * f64::max(x - 1.0, 0.0), epsilon = 1e-14);
        }
        let h = 1e-3;
        let samples: Vec<f64> = (0..2001).map(|i| s.eval(h * i as f64)).collect();
        let lw = s.operator().apply_operator_fd(&samples, h).unwrap();
        let mass: f64 = lw.iter().sum::<f64>() * h;
        assert_abs_diff_eq!(mass, -2.0, epsilon = 1e-9);

        let ri = RightInverse::canonical(&d(1)).unwrap();
        let w = measure(&[(0.5, 2.0), (1.5, -1.0), (-1.0, 0.5)]);
        let s = ri.solve_ode(&w, &[3.0]).unwrap();
        // staircase oracle: constant 3 at 0, jumps at each atom
        for (x, want) in [(-2.0, 2.5), (-0.5, 3.0), (0.2, 3.0), (1.0, 5.0), (2.0, 4.0)] {
            assert_abs_diff_eq!(s.eval(x), want, epsilon = 1e-14);
        }
    }

    fn random_measure(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> DiscreteMeasure {
        let k = rng.random_range(1..6);
        measure(
            &(0..k)
                .map(|_| (rng.random_range(lo..hi), rng.random_range(-3.0..3.0)))
                .collect::<Vec<_>>(),
        )
    }

    /// Derivatives at 0 of the polynomial that interpolates `f` at `n`
    /// points near the origin (exact when `f` is such a polynomial there).
    fn derivatives_at_origin(f: impl Fn(f64) -> f64, n: usize, radius: f64) -> Vec<f64> {
        let xs: Vec<f64> = (0..n).map(|i| -radius + 2.0 * radius * i as f64 / (n.max(2) - 1) as f64).collect();
        let v = Matrix::from_fn(n, n, |i, j| xs[i].powi(j as i32));
        let c = v.solve(&xs.iter().map(|&x| f(x)).collect::<Vec<_>>(), 0.0).unwrap();
        c.iter().enumerate().map(|(k, ck)| ck * factorial(k)).collect()
    }

    #[test]
    fn boundary_conditions_hold_for_random_measures() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3 {
            let ri = RightInverse::canonical(&d(n)).unwrap();
            for _ in 0..100 {
                let w = random_measure(&mut rng, -4.0, 4.0);
                let f = ri.apply(&w).unwrap();
                let gap = w.atoms().iter().map(|a| a.0.x().abs()).fold(f64::INFINITY, f64::min);
                let phi = derivatives_at_origin(|x| f.eval(x), n, 0.5 * gap.min(0.5));
                assert!(norm2(&phi) <= 1e-9, "N={n}: {phi:?}");
            }
        }
    }

    #[test]
    fn boundary_conditions_for_sample_based_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let op = d(2);
        let nus = vec![Functional::ideal(-1.0), Functional::ideal(0.5), Functional::ideal(2.0)];
        let ri = RightInverse::new(measurement_system(&op, &nus).unwrap()).unwrap();
        for _ in 0..100 {
            let w = random_measure(&mut rng, -3.0, 3.0);
            let f = ri.apply(&w).unwrap();
            let phi: Vec<f64> = ri
                .system()
                .functionals()
                .iter()
                .map(|c| {
                    c.terms
                        .iter()
                        .map(|(wt, nu)| wt * nu.apply_to(|x| f.eval(x), &[], QuadratureRule::default()).unwrap())
                        .sum()
                })
                .collect();
            assert!(norm2(&phi) <= 1e-9, "{phi:?}");
        }
    }

    #[test]
    fn weak_right_inverse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ops = [
            d(1),
            d(2),
            d(3),
            SplineAdmissibleOperator::exponential(vec![-1.0, -0.5]).unwrap(),
            SplineAdmissibleOperator::exponential(vec![0.0, -2.0, -2.0]).unwrap(),
            SplineAdmissibleOperator::fractional(2.0).unwrap(),
        ];
        let rule = QuadratureRule::default();
        for op in &ops {
            let ri = RightInverse::canonical(op).unwrap();
            for _ in 0..20 {
                let psi = crate::verify::GaussPoly {
                    c: rng.random_range(-1.0..1.0),
                    sigma: rng.random_range(0.3..0.8),
                    coeffs: (0..rng.random_range(1..4)).map(|_| rng.random_range(-1.0..1.0)).collect(),
                };
                let lpsi = psi.adjoint(op).unwrap();
                for &y in &[-1.3, -0.4, 0.25, 0.9, 1.6] {
                    let q = ri.q(y).unwrap();
                    let lo = psi.c - 12.0 * psi.sigma;
                    let hi = psi.c + 12.0 * psi.sigma;
                    let lhs = integrate(
                        |x| ri.kernel_with_q(Point::Line(x), Point::Line(y), &q).unwrap() * lpsi.eval(x),
                        lo,
                        hi,
                        &[y, 0.0],
                        rule,
                    )
                    .unwrap();
                    assert!((lhs - psi.eval(y)).abs() <= 1e-6, "{op} y={y}: {lhs} vs {}", psi.eval(y));
                }
            }
        }
    }

    #[test]
    fn direct_sum_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 1..=3 {
            let ri = RightInverse::canonical(&d(n)).unwrap();
            for _ in 0..20 {
                let w = random_measure(&mut rng, -3.0, 3.0);
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let s = ri.solve_ode(&w, &b).unwrap();
                let phi = ri.boundary_values(&s).unwrap();
                for (p, bn) in phi.iter().zip(&b) {
                    assert_abs_diff_eq!(p, bn, epsilon = 1e-10);
                }
                let rebuilt = ri.solve_ode(&s.innovation(), &phi).unwrap();
                for i in 0..61 {
                    let x = -3.0 + 0.1 * i as f64;
                    assert!((rebuilt.eval(x) - s.eval(x)).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn isometry_in_numeric_gtv() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=3 {
            let ri = RightInverse::canonical(&d(n)).unwrap();
            for _ in 0..5 {
                let w = random_measure(&mut rng, -2.0, 2.0);
                let f = ri.apply(&w).unwrap();
                let num = f.gtv_numeric(-3.0, 3.0, 1e-3).unwrap();
                assert!((num - w.total_variation()).abs() <= 0.02 * w.total_variation(), "N={n}");
            }
        }
    }

    #[test]
    fn measures_canonicalize() {
        let m = measure(&[(2.0, 1.0), (1.0, 0.5), (2.0, 2.0), (3.0, 0.0)]);
        assert_eq!(m.atoms(), &[(Point::Line(1.0), 0.5), (Point::Line(2.0), 3.0)]);
        assert_eq!(m.total_variation(), 3.5);
        let text = serde_json::to_string(&m).unwrap();
        let back: DiscreteMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn identity_has_no_right_inverse() {
        assert!(matches!(
            RightInverse::canonical(&SplineAdmissibleOperator::identity()),
            Err(Error::IdentityHasNoGreenFunction)
        ));
    }

    #[test]
    fn thin_plate_right_inverse_respects_its_samples() {
        let ri = RightInverse::canonical(&SplineAdmissibleOperator::thin_plate()).unwrap();
        let w = DiscreteMeasure::new(vec![(Point::Plane([0.3, 0.4]), 1.0), (Point::Plane([-1.0, 2.0]), -0.5)]).unwrap();
        let f = ri.apply(&w).unwrap();
        for p in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] {
            assert!(f.eval(p).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn total_variation_is_nonnegative_and_subadditive(
            a in prop::collection::vec((-5.0f64..5.0, -3.0f64..3.0), 0..8),
            b in prop::collection::vec((-5.0f64..5.0, -3.0f64..3.0), 0..8),
        ) {
            let ma = measure(&a);
            let mb = measure(&b);
            let both = measure(&a.iter().chain(&b).copied().collect::<Vec<_>>());
            prop_assert!(ma.total_variation() >= 0.0);
            prop_assert!(both.total_variation() <= ma.total_variation() + mb.total_variation() + 1e-12);
        }

        #[test]
        fn closed_form_and_subtraction_agree(x in -20.0f64..20.0, y in -20.0f64..20.0, n in 1usize..5) {
            let ri = RightInverse::canonical(&d(n)).unwrap();
            let a = ri.kernel_closed_form(x, y).unwrap();
            let b = ri.kernel_subtraction(x, y).unwrap();
            let scale = 1.0 + x.abs().max(y.abs()).powi(n as i32 - 1);
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }
}
