//! Nonuniform L-splines `s = Σ a_k ρ_L(· - x_k) + Σ b_n p_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::linalg::{norm2, sub};
use crate::measurements::Functional;
use crate::operators::{NullSpaceBasis, Point, SplineAdmissibleOperator};
use crate::problem::DiscretizedProblem;
use crate::rightinv::DiscreteMeasure;
use crate::solvers::{prune_knots, PruneOptions, SolveReport};

/// A spline with knots `x_k`, weights `a_k` and null-space coefficients
/// `b_n` in the basis of [`SplineAdmissibleOperator::nullspace_basis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineRepr", into = "SplineRepr")]
pub struct NonuniformSpline {
    operator: SplineAdmissibleOperator,
    knots: Vec<Point>,
    weights: Vec<f64>,
    null_coeffs: Vec<f64>,
    basis: NullSpaceBasis,
}

#[derive(Serialize, Deserialize)]
struct SplineRepr {
    operator: SplineAdmissibleOperator,
    knots: Vec<Point>,
    weights: Vec<f64>,
    null_coeffs: Vec<f64>,
}

impl TryFrom<SplineRepr> for NonuniformSpline {
    type Error = Error;

    fn try_from(r: SplineRepr) -> Result<Self> {
        Self::new(r.operator, r.knots, r.weights, r.null_coeffs)
    }
}

impl From<NonuniformSpline> for SplineRepr {
    fn from(s: NonuniformSpline) -> Self {
        Self {
            operator: s.operator,
            knots: s.knots,
            weights: s.weights,
            null_coeffs: s.null_coeffs,
        }
    }
}

impl NonuniformSpline {
    /// Knots are sorted and coincident knots merged.
    pub fn new(
        operator: SplineAdmissibleOperator,
        knots: Vec<Point>,
        weights: Vec<f64>,
        null_coeffs: Vec<f64>,
    ) -> Result<Self> {
        if knots.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} knots and {} weights",
                knots.len(),
                weights.len()
            )));
        }
        let innovation = DiscreteMeasure::new(knots.into_iter().zip(weights).collect())?;
        Self::from_innovation(operator, &innovation, null_coeffs)
    }

    pub fn from_innovation(
        operator: SplineAdmissibleOperator,
        innovation: &DiscreteMeasure,
        null_coeffs: Vec<f64>,
    ) -> Result<Self> {
        if null_coeffs.len() != operator.nullspace_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} null-space coefficients for N0 = {}",
                null_coeffs.len(),
                operator.nullspace_dim()
            )));
        }
        if let Some(&(p, _)) = innovation.atoms().first() {
            if p.dim() != operator.dimension() {
                return Err(Error::DimensionMismatch(format!(
                    "{}-D knots for a {}-D operator",
                    p.dim(),
                    operator.dimension()
                )));
            }
        }
        let basis = operator.nullspace_basis();
        Ok(Self {
            knots: innovation.atoms().iter().map(|a| a.0).collect(),
            weights: innovation.atoms().iter().map(|a| a.1).collect(),
            operator,
            null_coeffs,
            basis,
        })
    }

    /// The null-space function `Σ b_n p_n`.
    pub fn null_only(operator: SplineAdmissibleOperator, null_coeffs: Vec<f64>) -> Result<Self> {
        Self::from_innovation(operator, &DiscreteMeasure::default(), null_coeffs)
    }

    /// Pruned spline of a grid solution.
    pub fn from_report(problem: &DiscretizedProblem, report: &SolveReport, opts: PruneOptions) -> Result<Self> {
        let innovation = prune_knots(report, &problem.grid, opts)?;
        Self::from_innovation(problem.operator.clone(), &innovation, report.b.clone())
    }

    /// `(ν_m(s))_m`, computed from the functionals rather than a matrix.
    pub fn measure(&self, functionals: &[Functional]) -> Result<Vec<f64>> {
        functionals
            .iter()
            .map(|nu| {
                let mut v = 0.0;
                for (&k, &a) in self.knots.iter().zip(&self.weights) {
                    v += a * nu.pair_atom(&self.operator, k, Default::default())?;
                }
                for (&c, p) in self.null_coeffs.iter().zip(&self.basis.functions) {
                    v += c * nu.act_on_null(p)?;
                }
                Ok(v)
            })
            .collect()
    }

    /// `‖y - ν(s)‖₂`.
    pub fn measurement_residual(&self, functionals: &[Functional], y: &[f64]) -> Result<f64> {
        if functionals.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} functionals and {} data values",
                functionals.len(),
                y.len()
            )));
        }
        Ok(norm2(&sub(&self.measure(functionals)?, y)))
    }

    pub fn operator(&self) -> &SplineAdmissibleOperator {
        &self.operator
    }

    pub fn knots(&self) -> &[Point] {
        &self.knots
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn null_coeffs(&self) -> &[f64] {
        &self.null_coeffs
    }

    pub fn num_knots(&self) -> usize {
        self.knots.len()
    }

    /// `s(x)`. In measure mode the spline is a Dirac train and this
    /// returns the null density; a dimension mismatch gives NaN.
    pub fn eval(&self, x: impl Into<Point>) -> f64 {
        let x = x.into();
        let atoms: f64 = if self.operator.is_identity() {
            0.0
        } else {
            self.knots
                .iter()
                .zip(&self.weights)
                .map(|(&k, &a)| a * self.operator.green_eval(x.minus(k)).unwrap_or(f64::NAN))
                .sum()
        };
        atoms + self.basis.eval_combination(&self.null_coeffs, x)
    }

    /// `k`-th derivative of a 1-D spline, right limits at knots.
    pub fn derivative(&self, x: f64, k: u32) -> Result<f64> {
        let mut total = 0.0;
        for (&knot, &a) in self.knots.iter().zip(&self.weights) {
            total += a * self.operator.green_derivative(x - knot.x(), k)?;
        }
        for (&c, f) in self.null_coeffs.iter().zip(&self.basis.functions) {
            total += c * f.derivative(x, k);
        }
        Ok(total)
    }

    /// `L s = Σ a_k δ(· - x_k)`.
    pub fn innovation(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_sorted(self.knots.iter().copied().zip(self.weights.iter().copied()).collect())
    }

    /// `‖L s‖_M = Σ |a_k|`.
    pub fn gtv(&self) -> f64 {
        self.weights.iter().fold(0.0, |acc, a| acc + a.abs())
    }

    /// `h Σ |L_h s|` from samples of `s` on the uniform grid `lo, lo + h, …`
    /// up to `hi`.
    pub fn gtv_numeric(&self, lo: f64, hi: f64, h: f64) -> Result<f64> {
        if self.operator.is_identity() || self.operator.dimension() != 1 {
            return Err(Error::UnsupportedOperator(format!(
                "1-D numeric gTV for {}",
                self.operator
            )));
        }
        let n = grid_len(lo, hi, h)?;
        let needed = self.operator.nullspace_dim() + 2;
        if n < needed {
            return Err(Error::GridTooShort { len: n, needed });
        }
        let samples: Vec<f64> = (0..n).map(|i| self.eval(lo + h * i as f64)).collect();
        let out = self.operator.apply_operator_fd(&samples, h)?;
        Ok(h * out.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Numeric gTV of a 2-D spline on the square grid `[lo, hi]²`.
    pub fn gtv_numeric_2d(&self, lo: [f64; 2], hi: [f64; 2], h: f64) -> Result<f64> {
        if self.operator.dimension() != 2 {
            return Err(Error::UnsupportedOperator(format!("2-D numeric gTV for {}", self.operator)));
        }
        let nx = grid_len(lo[0], hi[0], h)?;
        let ny = grid_len(lo[1], hi[1], h)?;
        if nx < 5 || ny < 5 {
            return Err(Error::GridTooShort { len: nx.min(ny), needed: 5 });
        }
        let rows: Vec<Vec<f64>> = (0..ny)
            .map(|j| {
                (0..nx)
                    .map(|i| self.eval([lo[0] + h * i as f64, lo[1] + h * j as f64]))
                    .collect()
            })
            .collect();
        let out = self.operator.apply_operator_fd_2d(&rows, h)?;
        Ok(h * h * out.iter().flatten().map(|v| v.abs()).sum::<f64>())
    }

    /// Pretty JSON with 17-digit floats.
    pub fn to_json(&self) -> Result<String> {
        jsonfmt::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("spline JSON: {e}")))
    }

    /// `x,value` CSV of the spline on the given abscissas.
    pub fn to_csv(&self, xs: &[f64]) -> String {
        let mut out = String::from("x,value\n");
        for &x in xs {
            out.push_str(&format!("{},{}\n", jsonfmt::fmt_f64(x), jsonfmt::fmt_f64(self.eval(x))));
        }
        out
    }
}

fn grid_len(lo: f64, hi: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(hi > lo) {
        return Err(Error::InvalidInput(format!("bad grid [{lo}, {hi}] with step {h}")));
    }
    Ok(((hi - lo) / h + 1e-9).floor() as usize + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(n: usize) -> SplineAdmissibleOperator {
        SplineAdmissibleOperator::derivative(n).unwrap()
    }

    fn hat() -> NonuniformSpline {
        NonuniformSpline::new(d(2), vec![1.0.into()], vec![-2.0], vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn spline_from_a_grid_solution() {
        use crate::problem::{build_problem, BuildOptions, ConstraintSet, GridSpec};
        use crate::solvers::solve_interpolation_lp;
        let nus: Vec<Functional> = [0.0, 1.0, 2.0].iter().map(|&x| Functional::ideal(x)).collect();
        let pr = build_problem(
            &d(2),
            &nus,
            ConstraintSet::point(vec![0.0, 1.0, 0.0]),
            &GridSpec::line(0.0, 2.0, 201),
            BuildOptions::default(),
        )
        .unwrap();
        let r = solve_interpolation_lp(&pr).unwrap();
        let s = NonuniformSpline::from_report(&pr, &r, PruneOptions::default()).unwrap();
        assert_eq!(s.num_knots(), 1);
        assert_abs_diff_eq!(s.gtv(), r.objective, epsilon = 1e-12);
        assert!(s.measurement_residual(&nus, &pr.y).unwrap() <= 1e-8);
        assert_abs_diff_eq!(s.eval(1.0), 1.0, epsilon = 1e-8);
        assert!(s.measurement_residual(&nus[..2], &pr.y).is_err());
    }

    #[test]
    fn integral_measurements_of_a_spline() {
        let nus = [Functional::moment(0, 0.0, 2.0), Functional::moment(1, 0.0, 2.0)];
        let v = hat().measure(&nus).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-10);
    }

    fn staircase() -> NonuniformSpline {
        NonuniformSpline::new(d(1), vec![2.0.into(), 1.0.into()], vec![-3.0, 1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn staircase_steps_at_knots() {
        let s = NonuniformSpline::new(d(1), vec![1.0.into()], vec![1.0], vec![0.0]).unwrap();
        assert_eq!(s.eval(2.0), 1.0);
        assert_eq!(s.eval(0.5), 0.0);
        let c = NonuniformSpline::null_only(d(1), vec![4.5]).unwrap();
        for x in [-3.0, 0.0, 7.0] {
            assert_eq!(c.eval(x), 4.5);
        }
    }

    #[test]
    fn hat_values() {
        let s = hat();
        // oracle: x - 2 (x - 1)_+
        for x in [0.5, 1.0, 1.5, 2.0, -1.0, 3.0] {
            let want = x - 2.0 * f64::max(x - 1.0, 0.0);
            assert_abs_diff_eq!(s.eval(x), want, epsilon = 1e-15);
        }
        assert_eq!(s.derivative(0.5, 1).unwrap(), 1.0);
        assert_eq!(s.derivative(1.5, 1).unwrap(), -1.0);
    }

    #[test]
    fn innovation_and_gtv() {
        assert_eq!(hat().innovation().atoms(), &[(Point::Line(1.0), -2.0)]);
        assert_eq!(hat().gtv(), 2.0);
        let c = NonuniformSpline::null_only(d(1), vec![1.0]).unwrap();
        assert!(c.innovation().is_empty());
        assert_eq!(c.gtv(), 0.0);
        let st = staircase();
        assert_eq!(st.innovation().atoms(), &[(Point::Line(1.0), 1.0), (Point::Line(2.0), -3.0)]);
        assert_eq!(st.gtv(), 4.0);
    }

    #[test]
    fn numeric_gtv_matches_weights() {
        let v = hat().gtv_numeric(-0.5, 2.5, 1e-3).unwrap();
        assert!((v - 2.0).abs() <= 0.04, "{v}");
        let c = NonuniformSpline::null_only(d(2), vec![1.7, 0.0]).unwrap();
        assert!(c.gtv_numeric(-1.0, 1.0, 1e-3).unwrap() <= 1e-10);
        let v = staircase().gtv_numeric(0.0, 3.0, 1e-3).unwrap();
        assert!((v - 4.0).abs() <= 0.08, "{v}");
    }

    #[test]
    fn numeric_gtv_converges_as_step_shrinks() {
        // opposite jumps closer than the coarse step cancel on that grid
        let s = NonuniformSpline::new(
            d(1),
            vec![1.0031.into(), 1.0072.into(), 1.5.into()],
            vec![1.0, -1.0, 0.5],
            vec![0.2],
        )
        .unwrap();
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&h| (s.gtv_numeric(0.0, 2.0, h).unwrap() - s.gtv()).abs())
            .collect();
        let roundoff = 1e-9;
        assert!(errs[0] > 1.0, "{errs:?}");
        for w in errs.windows(2) {
            assert!(w[1] <= w[0].max(roundoff), "{errs:?}");
        }
    }

    #[test]
    fn second_differences_vanish_between_knots() {
        let s = hat();
        let h = 1e-3;
        for start in [0.1, 1.2] {
            let v: Vec<f64> = (0..200).map(|i| s.eval(start + h * i as f64)).collect();
            for w in v.windows(3) {
                assert!((w[0] - 2.0 * w[1] + w[2]).abs() / (h * h) <= 1e-8 / (h * h) + 1e-6);
            }
        }
    }

    #[test]
    fn coincident_knots_merge() {
        let s = NonuniformSpline::new(d(2), vec![1.0.into(), 1.0.into()], vec![-1.0, -1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(s, hat());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let s = NonuniformSpline::new(d(3), vec![0.1.into(), (1.0 / 3.0).into()], vec![0.7, -1e-9], vec![0.1, 0.2, 0.3])
            .unwrap();
        let text = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["operator"]["kind"], "derivative");
        assert_eq!(NonuniformSpline::from_json(&text).unwrap(), s);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = hat().to_csv(&[0.0, 0.5]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,value");
        assert_eq!(lines.len(), 3);
        let vals: Vec<f64> = lines[2].split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.5, 0.5]);
    }

    #[test]
    fn bad_lengths_are_rejected() {
        assert!(NonuniformSpline::new(d(2), vec![1.0.into()], vec![], vec![0.0, 0.0]).is_err());
        assert!(NonuniformSpline::null_only(d(2), vec![1.0]).is_err());
    }

    #[test]
    fn thin_plate_spline_evaluates_in_the_plane() {
        let op = SplineAdmissibleOperator::thin_plate();
        let s = NonuniformSpline::new(op, vec![[0.0, 0.0].into()], vec![1.0], vec![1.0, 0.0, 0.0]).unwrap();
        let r: f64 = 2.0;
        assert_abs_diff_eq!(s.eval([2.0, 0.0]), 1.0 + r * r * r.ln() / (8.0 * std::f64::consts::PI), epsilon = 1e-14);
    }
}
