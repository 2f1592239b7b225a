//! Grid discretization: atoms `ρ_L(· - τ_n)` on a uniform grid plus the
//! null-space block, observed through the measurement functionals.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biortho::{wellposedness_bound, CrossProductMatrix};
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::linalg::{column_space, norm2, orthogonal_residual, Matrix};
use crate::measurements::Functional;
use crate::operators::{Point, SplineAdmissibleOperator};
use crate::quadrature::QuadratureRule;

/// Entries smaller than this are stored as exact zeros.
pub const FLUSH_TOL: f64 = 1e-14;
/// Well-posedness bound below which a warning (or, in strict mode, an
/// error) is raised.
pub const ILL_POSED_BOUND: f64 = 1e-8;
/// Residual tolerance for equality constraints.
pub const FEAS_TOL: f64 = 1e-8;

/// The data-fidelity set `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstraintSet {
    /// `Hf = y`.
    Point { y: Vec<f64> },
    /// `‖Hf - y‖₂ ≤ ε`.
    Ball { y: Vec<f64>, epsilon: f64 },
    /// `lo ≤ Hf ≤ hi` componentwise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ConstraintSet {
    pub fn point(y: Vec<f64>) -> Self {
        ConstraintSet::Point { y }
    }

    /// A ball of radius `epsilon`; zero radius gives [`ConstraintSet::Point`].
    pub fn ball(y: Vec<f64>, epsilon: f64) -> Result<Self> {
        ConstraintSet::Ball { y, epsilon }.canonical()
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        ConstraintSet::Box { lo, hi }.canonical()
    }

    /// Validates and folds zero-radius balls into points.
    pub fn canonical(self) -> Result<Self> {
        match self {
            ConstraintSet::Point { ref y } => {
                finite(y)?;
                Ok(self)
            }
            ConstraintSet::Ball { y, epsilon } => {
                finite(&y)?;
                if !(epsilon >= 0.0) || !epsilon.is_finite() {
                    return Err(Error::InvalidConstraint(format!("ball radius must be >= 0, got {epsilon}")));
                }
                Ok(if epsilon == 0.0 {
                    ConstraintSet::Point { y }
                } else {
                    ConstraintSet::Ball { y, epsilon }
                })
            }
            ConstraintSet::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::InvalidConstraint(format!("{} lower and {} upper bounds", lo.len(), hi.len())));
                }
                finite(&lo)?;
                finite(&hi)?;
                if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                    return Err(Error::InvalidConstraint("box with lo > hi".into()));
                }
                Ok(ConstraintSet::Box { lo, hi })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ConstraintSet::Point { y } | ConstraintSet::Ball { y, .. } => y.len(),
            ConstraintSet::Box { lo, .. } => lo.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Data vector, or the box midpoint.
    pub fn center(&self) -> Vec<f64> {
        match self {
            ConstraintSet::Point { y } | ConstraintSet::Ball { y, .. } => y.clone(),
            ConstraintSet::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        }
    }

    /// Whether `v` lies in the set up to `tol`.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match self {
            ConstraintSet::Point { y } => residual_norm(v, y) <= tol,
            ConstraintSet::Ball { y, epsilon } => residual_norm(v, y) <= epsilon + tol,
            ConstraintSet::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol),
        }
    }
}

fn residual_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidConstraint("non-finite data".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spline,
    Measure,
}

/// Placement of the dictionary grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    /// Cover the measurement supports with a relative `margin` on each
    /// side, using `n` points (default `max(10 M, 200) + 1`).
    Auto {
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default)]
        n: Option<usize>,
    },
    /// `n` equispaced points from `lo` to `hi`.
    Line { lo: f64, hi: f64, n: usize },
    /// Tensor grid in the plane, x-index fastest.
    Plane { lo: [f64; 2], hi: [f64; 2], n: [usize; 2] },
}

fn default_margin() -> f64 {
    0.1
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            margin: default_margin(),
            n: None,
        }
    }
}

impl GridSpec {
    pub fn line(lo: f64, hi: f64, n: usize) -> Self {
        GridSpec::Line { lo, hi, n }
    }

    /// Grid points for the given measurements.
    pub fn resolve(&self, op: &SplineAdmissibleOperator, measurements: &[Functional]) -> Result<Vec<Point>> {
        let m = measurements.len();
        let default_n = (10 * m).max(200) + 1;
        match *self {
            GridSpec::Line { lo, hi, n } => {
                if op.dimension() != 1 {
                    return Err(Error::DimensionMismatch("1-D grid for a 2-D operator".into()));
                }
                line(lo, hi, n).map(|v| v.into_iter().map(Point::Line).collect())
            }
            GridSpec::Plane { lo, hi, n } => {
                if op.dimension() != 2 {
                    return Err(Error::DimensionMismatch("2-D grid for a 1-D operator".into()));
                }
                let xs = line(lo[0], hi[0], n[0])?;
                let ys = line(lo[1], hi[1], n[1])?;
                Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| Point::Plane([x, y]))).collect())
            }
            GridSpec::Auto { margin, n } => {
                if !(margin >= 0.0) {
                    return Err(Error::InvalidInput(format!("grid margin must be >= 0, got {margin}")));
                }
                if op.dimension() == 2 {
                    let pts: Vec<Point> = measurements
                        .iter()
                        .filter_map(|f| match f {
                            Functional::IdealSample { at } => Some(*at),
                            _ => None,
                        })
                        .collect();
                    if pts.is_empty() {
                        return Err(Error::NoMeasurements);
                    }
                    let side = ((n.unwrap_or(default_n) as f64).sqrt().ceil() as usize).max(2);
                    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                    for p in &pts {
                        for (k, v) in [p.x(), p.y()].into_iter().enumerate() {
                            lo[k] = lo[k].min(v);
                            hi[k] = hi[k].max(v);
                        }
                    }
                    for k in 0..2 {
                        let pad = margin * span_or_one(hi[k] - lo[k]);
                        lo[k] -= pad;
                        hi[k] += pad;
                    }
                    return GridSpec::Plane { lo, hi, n: [side, side] }.resolve(op, measurements);
                }
                let (lo, hi) = measurements.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), f| {
                    let (a, b) = f.support();
                    (l.min(a), h.max(b))
                });
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::NoMeasurements);
                }
                let pad = margin * span_or_one(hi - lo);
                GridSpec::Line {
                    lo: lo - pad,
                    hi: hi + pad,
                    n: n.unwrap_or(default_n),
                }
                .resolve(op, measurements)
            }
        }
    }
}

fn span_or_one(span: f64) -> f64 {
    if span > 0.0 {
        span
    } else {
        1.0
    }
}

fn line(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("grid [{lo}, {hi}] with {n} points")));
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BuildOptions {
    /// Fail instead of warning when the null space is poorly observed.
    pub strict: bool,
    pub rule: QuadratureRule,
}

/// The finite problem: atoms `G`, null block `P`, data `y` and constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedProblem {
    pub operator: SplineAdmissibleOperator,
    pub measurements: Vec<Functional>,
    pub grid: Vec<Point>,
    pub g: Matrix,
    pub p: Matrix,
    pub y: Vec<f64>,
    pub constraint: ConstraintSet,
    pub mode: Mode,
    /// `σ_min²(P)/σ_max(P)`, absent when the null space is trivial.
    pub wellposedness: Option<f64>,
}

/// Assembles `G[m, n] = ⟨ν_m, ρ_L(· - τ_n)⟩` and `P[m, n] = ⟨ν_m, p_n⟩`.
pub fn build_problem(
    op: &SplineAdmissibleOperator,
    measurements: &[Functional],
    constraint: ConstraintSet,
    grid: &GridSpec,
    options: BuildOptions,
) -> Result<DiscretizedProblem> {
    if measurements.is_empty() {
        return Err(Error::NoMeasurements);
    }
    let constraint = constraint.canonical()?;
    if constraint.len() != measurements.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} data values for {} measurements",
            constraint.len(),
            measurements.len()
        )));
    }
    for nu in measurements {
        nu.admissible_for(op)?;
    }
    let taus = grid.resolve(op, measurements)?;
    let (m, n) = (measurements.len(), taus.len());
    if n <= m {
        return Err(Error::GridTooCoarse { atoms: n, measurements: m });
    }
    let rows: Vec<Vec<f64>> = measurements
        .par_iter()
        .map(|nu| {
            taus.iter()
                .map(|&t| nu.pair_atom(op, t, options.rule).map(flush))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let g = Matrix::from_vec(m, n, rows.into_iter().flatten().collect());
    let basis = op.nullspace_basis();
    let mut p = Matrix::zeros(m, basis.len());
    for (i, nu) in measurements.iter().enumerate() {
        for (j, f) in basis.functions.iter().enumerate() {
            p[(i, j)] = flush(nu.act_on_null_with(f, options.rule)?);
        }
    }
    let wellposedness = if basis.is_empty() {
        None
    } else {
        let b = wellposedness_bound(&CrossProductMatrix(p.clone()))?;
        if b < ILL_POSED_BOUND {
            if options.strict {
                return Err(Error::IllPosedNullspace { bound: b });
            }
            warn!("null space is poorly observed by the measurements (B = {b:.3e})");
        }
        Some(b)
    };
    let mode = if op.is_identity() { Mode::Measure } else { Mode::Spline };
    Ok(DiscretizedProblem {
        operator: op.clone(),
        measurements: measurements.to_vec(),
        grid: taus,
        g,
        p,
        y: constraint.center(),
        constraint,
        mode,
        wellposedness,
    })
}

fn flush(v: f64) -> f64 {
    if v.abs() < FLUSH_TOL {
        0.0
    } else {
        v
    }
}

/// Outcome of [`feasibility_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Distance from the data to the range of `[G P]` (Point and Ball) or
    /// from the box to the range (Box, zero when feasible).
    pub residual: f64,
}

impl DiscretizedProblem {
    pub fn num_measurements(&self) -> usize {
        self.g.rows()
    }

    pub fn num_atoms(&self) -> usize {
        self.g.cols()
    }

    pub fn nullspace_dim(&self) -> usize {
        self.p.cols()
    }

    /// `[G P]`.
    pub fn system_matrix(&self) -> Matrix {
        self.g.hstack(&self.p)
    }

    /// `G a + P b`.
    pub fn forward(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut v = self.g.matvec(a);
        for (vi, pi) in v.iter_mut().zip(self.p.matvec(b)) {
            *vi += pi;
        }
        v
    }

    /// `‖y - G a - P b‖₂`.
    pub fn residual(&self, a: &[f64], b: &[f64]) -> f64 {
        residual_norm(&self.forward(a, b), &self.y)
    }

    /// Uniform grid step (1-D), or the smaller axis step in the plane.
    pub fn grid_step(&self) -> f64 {
        grid_step(&self.grid)
    }

    /// Same problem with a different constraint on the same measurements.
    pub fn with_constraint(&self, constraint: ConstraintSet) -> Result<Self> {
        let constraint = constraint.canonical()?;
        if constraint.len() != self.num_measurements() {
            return Err(Error::DimensionMismatch(format!(
                "{} data values for {} measurements",
                constraint.len(),
                self.num_measurements()
            )));
        }
        Ok(Self {
            y: constraint.center(),
            constraint,
            ..self.clone()
        })
    }

    /// Indices of atoms grouped by identical `G` columns, in grid order;
    /// all-zero columns are left out.
    pub fn column_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let cols: Vec<Vec<f64>> = (0..self.num_atoms()).map(|j| self.g.column(j)).collect();
        let mut order: Vec<usize> = (0..cols.len()).filter(|&j| cols[j].iter().any(|&v| v != 0.0)).collect();
        order.sort_by(|&i, &j| {
            cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        for j in order {
            match groups.last_mut() {
                Some(g) if cols[g[0]] == cols[j] => g.push(j),
                _ => groups.push(vec![j]),
            }
        }
        groups.sort_by_key(|g| g[0]);
        groups
    }

    /// Pretty JSON with 17-digit floats.
    pub fn to_json(&self) -> Result<String> {
        jsonfmt::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("problem JSON: {e}")))
    }
}

pub(crate) fn grid_step(grid: &[Point]) -> f64 {
    match grid {
        [a, b, ..] => match (a, b) {
            (Point::Line(x0), Point::Line(x1)) => (x1 - x0).abs(),
            _ => {
                let dx = (b.x() - a.x()).abs();
                let dy = grid
                    .iter()
                    .map(|p| (p.y() - a.y()).abs())
                    .find(|&d| d > 0.0)
                    .unwrap_or(dx);
                if dx > 0.0 {
                    dx.min(dy)
                } else {
                    dy
                }
            }
        },
        _ => 0.0,
    }
}

/// Whether the constraint set meets the range of `[G P]`.
pub fn feasibility_check(problem: &DiscretizedProblem) -> Feasibility {
    let a = problem.system_matrix();
    let basis = column_space(&a, 1e-10);
    let dist = |y: &[f64]| norm2(&orthogonal_residual(&basis, y));
    match &problem.constraint {
        ConstraintSet::Point { y } => {
            let r = dist(y);
            Feasibility {
                feasible: r <= FEAS_TOL * norm2(y).max(1.0),
                residual: r,
            }
        }
        ConstraintSet::Ball { y, epsilon } => {
            let r = dist(y);
            Feasibility {
                feasible: norm2(y) <= *epsilon || r <= epsilon + FEAS_TOL,
                residual: r,
            }
        }
        ConstraintSet::Box { .. } => {
            if basis.len() == problem.num_measurements() {
                return Feasibility {
                    feasible: true,
                    residual: 0.0,
                };
            }
            match crate::solvers::box_feasibility(problem) {
                Ok(r) => Feasibility {
                    feasible: r <= FEAS_TOL,
                    residual: r,
                },
                Err(_) => Feasibility {
                    feasible: false,
                    residual: f64::INFINITY,
                },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(n: usize) -> SplineAdmissibleOperator {
        SplineAdmissibleOperator::derivative(n).unwrap()
    }

    fn samples(xs: &[f64]) -> Vec<Functional> {
        xs.iter().map(|&x| Functional::ideal(x)).collect()
    }

    fn hat_problem() -> DiscretizedProblem {
        build_problem(
            &d(2),
            &samples(&[0.0, 1.0, 2.0]),
            ConstraintSet::point(vec![0.0, 1.0, 0.0]),
            &GridSpec::line(0.0, 2.0, 201),
            BuildOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn ramp_dictionary() {
        let pr = hat_problem();
        assert_eq!((pr.g.rows(), pr.g.cols()), (3, 201));
        let xs = [0.0, 1.0, 2.0];
        for (m, x) in xs.iter().enumerate() {
            for n in 0..201 {
                let tau = pr.grid[n].x();
                let want = f64::max(x - tau, 0.0);
                assert_abs_diff_eq!(pr.g[(m, n)], if want.abs() < FLUSH_TOL { 0.0 } else { want }, epsilon = 1e-15);
            }
        }
        assert_eq!(pr.p.to_rows(), vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        assert_eq!(pr.mode, Mode::Spline);
        assert!(pr.wellposedness.unwrap() > 0.3);
        assert_abs_diff_eq!(pr.grid_step(), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn moment_dictionary_in_measure_mode() {
        let nus: Vec<Functional> = (0..5).map(|k| Functional::moment(k, 0.0, 1.0)).collect();
        let pr = build_problem(
            &SplineAdmissibleOperator::identity(),
            &nus,
            ConstraintSet::point(vec![1.0; 5]),
            &GridSpec::line(0.0, 1.0, 101),
            BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(pr.mode, Mode::Measure);
        assert_eq!(pr.nullspace_dim(), 0);
        assert!(pr.wellposedness.is_none());
        for m in 0..5 {
            for n in 0..101 {
                let tau = pr.grid[n].x();
                let want = tau.powi(m as i32);
                assert_abs_diff_eq!(pr.g[(m, n)], if want < FLUSH_TOL { 0.0 } else { want }, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn empty_measurements_are_rejected() {
        let err = build_problem(&d(2), &[], ConstraintSet::point(vec![]), &GridSpec::default(), BuildOptions::default());
        assert!(matches!(err, Err(Error::NoMeasurements)));
    }

    #[test]
    fn inadmissible_functionals_are_rejected() {
        let err = build_problem(
            &d(1),
            &samples(&[0.0, 1.0]),
            ConstraintSet::point(vec![0.0, 1.0]),
            &GridSpec::default(),
            BuildOptions::default(),
        );
        assert!(matches!(err, Err(Error::InadmissibleFunctional(_))));
    }

    #[test]
    fn strict_mode_rejects_unobserved_null_space() {
        let nus = samples(&[1.0, 1.0, 1.0]);
        let c = ConstraintSet::point(vec![1.0, 1.0, 1.0]);
        let grid = GridSpec::line(0.0, 2.0, 21);
        let lax = build_problem(&d(2), &nus, c.clone(), &grid, BuildOptions::default()).unwrap();
        assert!(lax.wellposedness.unwrap() < ILL_POSED_BOUND);
        let strict = BuildOptions {
            strict: true,
            ..BuildOptions::default()
        };
        assert!(matches!(
            build_problem(&d(2), &nus, c, &grid, strict),
            Err(Error::IllPosedNullspace { .. })
        ));
    }

    #[test]
    fn auto_grid_covers_the_data_with_margin() {
        let nus = samples(&[0.0, 1.0, 2.0]);
        let pts = GridSpec::default().resolve(&d(2), &nus).unwrap();
        assert_eq!(pts.len(), 201);
        assert_abs_diff_eq!(pts[0].x(), -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(pts[200].x(), 2.2, epsilon = 1e-15);
        let many = samples(&(0..30).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(GridSpec::default().resolve(&d(2), &many).unwrap().len(), 301);
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let err = build_problem(
            &d(2),
            &samples(&[0.0, 1.0, 2.0]),
            ConstraintSet::point(vec![0.0; 3]),
            &GridSpec::line(0.0, 2.0, 3),
            BuildOptions::default(),
        );
        assert!(matches!(err, Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn causal_columns_left_of_support_are_zero() {
        let nus = vec![
            Functional::quasi_ideal(0.5),
            Functional::ApertureSample {
                at: 1.0,
                profile: crate::measurements::Profile::Box { width: 0.2 },
            },
        ];
        let pr = build_problem(
            &d(1),
            &nus,
            ConstraintSet::point(vec![0.0, 1.0]),
            &GridSpec::line(-1.0, 2.0, 61),
            BuildOptions::default(),
        )
        .unwrap();
        for (m, nu) in nus.iter().enumerate() {
            let (_, hi) = nu.support();
            for n in 0..pr.num_atoms() {
                if pr.grid[n].x() > hi {
                    assert_eq!(pr.g[(m, n)], 0.0);
                }
            }
        }
    }

    #[test]
    fn feasibility() {
        assert!(feasibility_check(&hat_problem()).feasible);
        let dup = build_problem(
            &d(2),
            &samples(&[1.0, 1.0, 2.0]),
            ConstraintSet::point(vec![0.0, 1.0, 0.0]),
            &GridSpec::line(0.0, 2.0, 21),
            BuildOptions::default(),
        )
        .unwrap();
        let f = feasibility_check(&dup);
        assert!(!f.feasible);
        assert_abs_diff_eq!(f.residual, 0.5f64.sqrt(), epsilon = 1e-12);
        let wide = dup.with_constraint(ConstraintSet::ball(vec![0.0, 1.0, 0.0], 2.0).unwrap()).unwrap();
        assert!(feasibility_check(&wide).feasible);
        let bx = dup
            .with_constraint(ConstraintSet::boxed(vec![0.0, 0.9, -0.1], vec![0.2, 1.0, 0.1]).unwrap())
            .unwrap();
        assert!(!feasibility_check(&bx).feasible);
        let bx = dup
            .with_constraint(ConstraintSet::boxed(vec![0.0, 0.0, -0.1], vec![0.6, 1.0, 0.1]).unwrap())
            .unwrap();
        assert!(feasibility_check(&bx).feasible);
    }

    #[test]
    fn constraint_canonicalization() {
        assert_eq!(ConstraintSet::ball(vec![1.0], 0.0).unwrap(), ConstraintSet::point(vec![1.0]));
        assert!(ConstraintSet::ball(vec![1.0], -1.0).is_err());
        assert!(ConstraintSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConstraintSet::boxed(vec![f64::NEG_INFINITY], vec![0.0]).is_err());
        assert_eq!(ConstraintSet::boxed(vec![0.0], vec![2.0]).unwrap().center(), vec![1.0]);
    }

    #[test]
    fn identical_columns_are_grouped() {
        let nus: Vec<Functional> = [0.5, 1.5].iter().map(|&x| Functional::quasi_ideal(x)).collect();
        let pr = build_problem(
            &d(1),
            &nus,
            ConstraintSet::point(vec![0.0, 1.0]),
            &GridSpec::line(0.0, 2.0, 21),
            BuildOptions::default(),
        )
        .unwrap();
        let groups = pr.column_groups();
        let covered: usize = groups.iter().map(Vec::len).sum();
        assert!(covered < pr.num_atoms());
        for g in &groups {
            for &j in g {
                assert_eq!(pr.g.column(j), pr.g.column(g[0]));
            }
        }
        assert!(groups.iter().any(|g| g.len() > 3));
    }

    #[test]
    fn json_round_trip() {
        let pr = hat_problem();
        let text = pr.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["operator", "grid", "g", "p", "y", "constraint"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(DiscretizedProblem::from_json(&text).unwrap(), pr);
    }

    #[test]
    fn plane_grids_for_thin_plates() {
        let op = SplineAdmissibleOperator::thin_plate();
        let nus: Vec<Functional> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
            .iter()
            .map(|&p| Functional::ideal(p))
            .collect();
        let pr = build_problem(
            &op,
            &nus,
            ConstraintSet::point(vec![0.0, 0.0, 0.0, 1.0]),
            &GridSpec::default(),
            BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(pr.num_atoms(), 15 * 15);
        assert_eq!(pr.nullspace_dim(), 3);
        assert!(pr.grid_step() > 0.0);
    }
}
