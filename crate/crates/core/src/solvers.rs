//! Solvers for the discretized problem: a two-phase primal simplex for the
//! exact and box-constrained ℓ₁ programs, accelerated proximal gradient for
//! the penalized form, bisection on λ for the ε-ball, and a brute-force
//! vertex enumerator used as a test oracle.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::linalg::{column_space, dot, least_squares, norm2, symmetric_eigen, Matrix};
use crate::operators::Point;
use crate::problem::{ConstraintSet, DiscretizedProblem};
use crate::rightinv::DiscreteMeasure;

/// Simplex iteration cap.
pub const MAX_SIMPLEX_ITER: usize = 100_000;
/// Relative weight below which atoms are dropped by [`prune_knots`].
pub const WEIGHT_TOL: f64 = 1e-8;
/// Merge distance in grid steps for [`prune_knots`].
pub const MERGE_RADIUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Result of a solve. `objective` is `β = Σ |a_n|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub status: Status,
    /// Penalty weight of penalized and ε-matched solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Number of null-space coefficients whose column is basic at the
    /// simplex optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_basic_count: Option<usize>,
    /// Whether the optimality conditions of the penalized problem were
    /// verified at the returned point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_certified: Option<bool>,
}

impl SolveReport {
    fn new(problem: &DiscretizedProblem, a: Vec<f64>, b: Vec<f64>, iterations: usize) -> Self {
        let residual = problem.residual(&a, &b);
        Self {
            objective: a.iter().map(|v| v.abs()).sum(),
            a,
            b,
            residual,
            iterations,
            status: Status::Optimal,
            lambda: None,
            null_basic_count: None,
            kkt_certified: None,
        }
    }

    /// Number of nonzero atom weights.
    pub fn nnz(&self) -> usize {
        self.a.iter().filter(|v| **v != 0.0).count()
    }

    /// Pretty JSON with 17-digit floats.
    pub fn to_json(&self) -> Result<String> {
        jsonfmt::to_string(self)
    }
}

// ---------------------------------------------------------------- simplex

/// Basic optimal solution of `min cᵀx, A x = b, x ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Basic column per retained row.
    pub basis: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    /// Initial tableau, used to rebuild `t` and `cost` from the basis.
    orig: Vec<f64>,
    row_ids: Vec<usize>,
    /// Cost vector of the current phase over all tableau columns.
    phase_cost: Vec<f64>,
    since_reinvert: usize,
    /// Consecutive pivots that did not move the vertex.
    degenerate_run: usize,
    feas_tol: f64,
}

/// Degenerate pivots after which both pivot choices follow Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

const REINVERT_EVERY: usize = 50;

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        if self.t[r * w + w - 1].abs() <= 1e-14 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        let piv = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let prow: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for (v, p) in self.t[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.t[i * w + c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.iterations += 1;
        self.since_reinvert += 1;
    }

    /// Recomputes `B⁻¹ [A | I | b]` and the reduced costs from the initial
    /// data. Keeps the drifted tableau if the basis matrix is singular.
    fn reinvert(&mut self) {
        self.since_reinvert = 0;
        let (m, w) = (self.rows, self.width);
        if m == 0 {
            self.cost = self.phase_cost.clone();
            return;
        }
        let bmat = Matrix::from_fn(m, m, |i, k| self.orig[self.row_ids[i] * w + self.basis[k]]);
        let Some(inv) = bmat.inverse(1e-14) else {
            return;
        };
        let mut t = vec![0.0; m * w];
        for i in 0..m {
            for k in 0..m {
                let f = inv[(i, k)];
                if f != 0.0 {
                    let src = &self.orig[self.row_ids[k] * w..(self.row_ids[k] + 1) * w];
                    for (v, o) in t[i * w..(i + 1) * w].iter_mut().zip(src) {
                        *v += f * o;
                    }
                }
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            for r in 0..m {
                t[r * w + j] = if r == i { 1.0 } else { 0.0 };
            }
        }
        let mut cost = self.phase_cost.clone();
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = self.phase_cost[j];
            if cb != 0.0 {
                for (v, x) in cost.iter_mut().zip(&t[i * w..(i + 1) * w]) {
                    *v -= cb * x;
                }
            }
        }
        for &j in &self.basis {
            cost[j] = 0.0;
        }
        self.t = t;
        self.cost = cost;
    }

    /// Primal iterations over columns `0..allowed`: most negative reduced
    /// cost first, Bland's lowest index once a degenerate run is detected.
    fn run(&mut self, allowed: usize, cost_tol: f64, piv_tol: f64) -> Result<()> {
        loop {
            if self.iterations >= MAX_SIMPLEX_ITER {
                return Err(Error::CyclingDetected(self.iterations));
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
            }
            let mut entering = None;
            let mut unbounded = false;
            let mut candidates: Vec<usize> = (0..allowed).filter(|&j| self.cost[j] < -cost_tol).collect();
            if self.degenerate_run < DEGENERATE_LIMIT {
                candidates.sort_by(|&p, &q| self.cost[p].total_cmp(&self.cost[q]).then(p.cmp(&q)));
            }
            for c in candidates {
                match self.ratio_test(c, piv_tol) {
                    Some(r) => {
                        entering = Some((r, c));
                        break;
                    }
                    None => {
                        // a descent direction whose reduced cost is roundoff
                        // relative to its column is not a real ray
                        let big = (0..self.rows).fold(1.0f64, |m, i| m.max(self.at(i, c).abs()));
                        if -self.cost[c] > 1e-9 * big {
                            unbounded = true;
                            break;
                        }
                    }
                }
            }
            match entering {
                Some((r, c)) => self.pivot(r, c),
                None if self.since_reinvert > 0 => self.reinvert(),
                None if unbounded => return Err(Error::UnboundedProblem),
                None => return Ok(()),
            }
        }
    }

    /// Leaving row by a two-pass Harris test: the bound is relaxed by the
    /// feasibility tolerance and the largest pivot within it is taken. In a
    /// long degenerate run the plain minimum ratio with lowest basic index
    /// is used instead.
    fn ratio_test(&self, c: usize, piv_tol: f64) -> Option<usize> {
        let big = (0..self.rows).fold(0.0f64, |m, i| m.max(self.at(i, c).abs()));
        let floor = piv_tol.max(1e-9 * big);
        let rows = || (0..self.rows).filter(move |&i| self.at(i, c) > floor);
        if self.degenerate_run >= DEGENERATE_LIMIT {
            return rows().min_by(|&i, &j| {
                let ri = self.rhs(i).max(0.0) / self.at(i, c);
                let rj = self.rhs(j).max(0.0) / self.at(j, c);
                ri.total_cmp(&rj).then(self.basis[i].cmp(&self.basis[j]))
            });
        }
        let bound = rows()
            .map(|i| (self.rhs(i).max(0.0) + self.feas_tol) / self.at(i, c))
            .fold(f64::INFINITY, f64::min);
        rows()
            .filter(|&i| self.rhs(i).max(0.0) / self.at(i, c) <= bound)
            .max_by(|&i, &j| {
                self.at(i, c)
                    .total_cmp(&self.at(j, c))
                    .then(self.basis[j].cmp(&self.basis[i]))
            })
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.t.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.row_ids.remove(r);
        self.rows -= 1;
    }
}

/// Two-phase primal simplex with Bland's anti-cycling rule. Redundant
/// equality rows are dropped after phase one.
pub fn simplex(a: &Matrix, b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m || c.len() != n {
        return Err(Error::DimensionMismatch(format!("LP with A {m}x{n}, b {}, c {}", b.len(), c.len())));
    }
    // columns equilibrated to unit max-norm; x = S x'
    let col_scale: Vec<f64> = (0..n)
        .map(|j| {
            let big = (0..m).fold(0.0f64, |acc, i| acc.max(a[(i, j)].abs()));
            if big > 0.0 {
                1.0 / big
            } else {
                1.0
            }
        })
        .collect();
    let width = n + m + 1;
    let mut t = vec![0.0; m * width];
    for i in 0..m {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * width + j] = s * a[(i, j)] * col_scale[j];
        }
        t[i * width + n + i] = 1.0;
        t[i * width + width - 1] = s * b[i];
    }
    let mut phase_cost = vec![0.0; width];
    phase_cost[n..n + m].iter_mut().for_each(|v| *v = 1.0);
    let mut tab = Tableau {
        rows: m,
        width,
        orig: t.clone(),
        t,
        cost: Vec::new(),
        basis: (n..n + m).collect(),
        iterations: 0,
        row_ids: (0..m).collect(),
        phase_cost,
        since_reinvert: 0,
        degenerate_run: 0,
        feas_tol: 1e-9 * b.iter().fold(1.0f64, |acc, v| acc.max(v.abs())),
    };
    tab.reinvert();
    let piv_tol = 1e-11;
    let bnorm = b.iter().map(|v| v.abs()).sum::<f64>().max(1.0);

    tab.run(n, 1e-11, piv_tol)?;
    let infeasibility = -tab.cost[width - 1];
    if infeasibility > 1e-9 * bnorm {
        return Err(Error::InfeasibleProblem { residual: infeasibility });
    }
    let mut i = 0;
    while i < tab.rows {
        if tab.basis[i] >= n {
            let col = (0..n)
                .filter(|&j| tab.at(i, j).abs() > 1e-9)
                .max_by(|&p, &q| tab.at(i, p).abs().total_cmp(&tab.at(i, q).abs()).then(q.cmp(&p)));
            match col {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.remove_row(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut phase_cost = vec![0.0; width];
    for j in 0..n {
        phase_cost[j] = c[j] * col_scale[j];
    }
    let cscale = phase_cost.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    tab.phase_cost = phase_cost;
    tab.reinvert();
    tab.run(n, 1e-11 * cscale, piv_tol)?;

    let mut x = vec![0.0; n];
    for r in 0..tab.rows {
        x[tab.basis[r]] = tab.rhs(r).max(0.0) * col_scale[tab.basis[r]];
    }
    refine_basic_solution(a, b, &tab.basis, &mut x);
    Ok(LpSolution {
        objective: dot(c, &x),
        x,
        basis: tab.basis,
        iterations: tab.iterations,
    })
}

/// Re-solves the basic system on the original data to remove the drift of
/// the tableau updates.
fn refine_basic_solution(a: &Matrix, b: &[f64], basis: &[usize], x: &mut [f64]) {
    let ab = a.select_columns(basis);
    let before = norm2(&crate::linalg::sub(&a.matvec(x), b));
    if let Some(xb) = least_squares(&ab, b, 1e-13) {
        if xb.iter().all(|v| *v >= -1e-9) {
            let mut y = x.to_vec();
            for (&j, v) in basis.iter().zip(&xb) {
                y[j] = v.max(0.0);
            }
            if norm2(&crate::linalg::sub(&a.matvec(&y), b)) <= before {
                x.copy_from_slice(&y);
            }
        }
    }
}

// ------------------------------------------------------ dictionary helpers

/// Representative atom per group of identical columns (the middle one),
/// in grid order.
fn representatives(problem: &DiscretizedProblem) -> Vec<usize> {
    let mut reps: Vec<usize> = problem.column_groups().iter().map(|g| g[g.len() / 2]).collect();
    reps.sort_unstable();
    reps
}

fn null_fit(problem: &DiscretizedProblem, target: &[f64]) -> Vec<f64> {
    let n0 = problem.nullspace_dim();
    if n0 == 0 {
        return Vec::new();
    }
    if let Some(b) = least_squares(&problem.p, target, 1e-12) {
        return b;
    }
    let mut keep = Vec::new();
    for j in 0..n0 {
        let mut trial = keep.clone();
        trial.push(j);
        if least_squares(&problem.p.select_columns(&trial), target, 1e-10).is_some() {
            keep = trial;
        }
    }
    let sub = least_squares(&problem.p.select_columns(&keep), target, 1e-10).unwrap_or_else(|| vec![0.0; keep.len()]);
    let mut b = vec![0.0; n0];
    for (&j, v) in keep.iter().zip(sub) {
        b[j] = v;
    }
    b
}

// ---------------------------------------------------------- LP front ends

fn expand(reps: &[usize], n: usize, pos: &[f64], neg: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; n];
    for (k, &j) in reps.iter().enumerate() {
        a[j] = pos[k] - neg[k];
    }
    a
}

/// `min ‖a‖₁` subject to `G a + P b = y`, as a basic optimal solution.
pub fn solve_interpolation_lp(problem: &DiscretizedProblem) -> Result<SolveReport> {
    let y = match &problem.constraint {
        ConstraintSet::Point { y } => y.clone(),
        other => {
            return Err(Error::InvalidConstraint(format!(
                "exact interpolation needs a point constraint, got {other:?}"
            )))
        }
    };
    let reps = representatives(problem);
    let (m, k, n0) = (problem.num_measurements(), reps.len(), problem.nullspace_dim());
    let gr = problem.g.select_columns(&reps);
    let a = Matrix::from_fn(m, 2 * k + 2 * n0, |i, j| {
        if j < k {
            gr[(i, j)]
        } else if j < 2 * k {
            -gr[(i, j - k)]
        } else if j < 2 * k + n0 {
            problem.p[(i, j - 2 * k)]
        } else {
            -problem.p[(i, j - 2 * k - n0)]
        }
    });
    let mut c = vec![0.0; 2 * k + 2 * n0];
    c[..2 * k].iter_mut().for_each(|v| *v = 1.0);
    let sol = simplex(&a, &y, &c)?;
    let x = &sol.x;
    let av = expand(&reps, problem.num_atoms(), &x[..k], &x[k..2 * k]);
    let b: Vec<f64> = (0..n0).map(|n| x[2 * k + n] - x[2 * k + n0 + n]).collect();
    let null_basic = (0..n0)
        .filter(|&n| sol.basis.contains(&(2 * k + n)) || sol.basis.contains(&(2 * k + n0 + n)))
        .count();
    let mut report = SolveReport::new(problem, av, b, sol.iterations);
    report.null_basic_count = Some(null_basic);
    debug!("simplex: {} pivots, beta = {:.6e}", sol.iterations, report.objective);
    Ok(report)
}

fn box_program(problem: &DiscretizedProblem) -> Result<(Matrix, Vec<f64>, Vec<usize>)> {
    let (lo, hi) = match &problem.constraint {
        ConstraintSet::Box { lo, hi } => (lo.clone(), hi.clone()),
        other => return Err(Error::InvalidConstraint(format!("expected a box constraint, got {other:?}"))),
    };
    let reps = representatives(problem);
    let (m, k, n0) = (problem.num_measurements(), reps.len(), problem.nullspace_dim());
    let gr = problem.g.select_columns(&reps);
    let cols = 2 * k + 2 * n0 + 2 * m;
    let a = Matrix::from_fn(2 * m, cols, |i, j| {
        if i < m {
            if j < k {
                gr[(i, j)]
            } else if j < 2 * k {
                -gr[(i, j - k)]
            } else if j < 2 * k + n0 {
                problem.p[(i, j - 2 * k)]
            } else if j < 2 * k + 2 * n0 {
                -problem.p[(i, j - 2 * k - n0)]
            } else if j == 2 * k + 2 * n0 + i {
                1.0
            } else {
                0.0
            }
        } else {
            let r = i - m;
            if j == 2 * k + 2 * n0 + r || j == 2 * k + 2 * n0 + m + r {
                1.0
            } else {
                0.0
            }
        }
    });
    let mut rhs = hi.clone();
    rhs.extend(hi.iter().zip(&lo).map(|(h, l)| h - l));
    Ok((a, rhs, reps))
}

/// `min ‖a‖₁` subject to `lo ≤ G a + P b ≤ hi`.
pub fn solve_box_lp(problem: &DiscretizedProblem) -> Result<SolveReport> {
    let (a, rhs, reps) = box_program(problem)?;
    let (k, n0) = (reps.len(), problem.nullspace_dim());
    let mut c = vec![0.0; a.cols()];
    c[..2 * k].iter_mut().for_each(|v| *v = 1.0);
    let sol = simplex(&a, &rhs, &c)?;
    let x = &sol.x;
    let av = expand(&reps, problem.num_atoms(), &x[..k], &x[k..2 * k]);
    let b: Vec<f64> = (0..n0).map(|n| x[2 * k + n] - x[2 * k + n0 + n]).collect();
    let mut report = SolveReport::new(problem, av, b, sol.iterations);
    let null_basic = (0..n0)
        .filter(|&n| sol.basis.contains(&(2 * k + n)) || sol.basis.contains(&(2 * k + n0 + n)))
        .count();
    report.null_basic_count = Some(null_basic);
    Ok(report)
}

/// ℓ₁ infeasibility of a box-constrained problem (zero when feasible).
pub fn box_feasibility(problem: &DiscretizedProblem) -> Result<f64> {
    let (a, rhs, _) = box_program(problem)?;
    match simplex(&a, &rhs, &vec![0.0; a.cols()]) {
        Ok(_) => Ok(0.0),
        Err(Error::InfeasibleProblem { residual }) => Ok(residual),
        Err(e) => Err(e),
    }
}

// ------------------------------------------------------------- penalized

/// Settings of the proximal-gradient solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenalizedOptions {
    /// Iteration cap per continuation stage.
    pub max_iter: usize,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    /// Number of iterations the change is measured over.
    pub window: usize,
    /// Warm-started path from `λ_max` down to the target.
    pub continuation: bool,
    /// Exact support refinement and optimality check after the iterations.
    pub polish: bool,
}

impl Default for PenalizedOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-10,
            window: 10,
            continuation: true,
            polish: true,
        }
    }
}

/// The penalized problem with the null block eliminated:
/// `½‖ỹ - G̃ a‖² + λ‖a‖₁` with `G̃ = Π G`, `ỹ = Π y` and `Π` the projector
/// onto the complement of the range of `P`.
struct Reduced {
    reps: Vec<usize>,
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Reduced {
    fn new(problem: &DiscretizedProblem) -> Self {
        let q = column_space(&problem.p, 1e-10);
        let project = |v: &mut Vec<f64>| {
            for _ in 0..2 {
                for qk in &q {
                    let c = dot(qk, v);
                    for (vi, qi) in v.iter_mut().zip(qk) {
                        *vi -= c * qi;
                    }
                }
            }
        };
        let reps = representatives(problem);
        let cols = reps
            .iter()
            .map(|&j| {
                let mut c = problem.g.column(j);
                project(&mut c);
                c
            })
            .collect();
        let mut y = problem.y.clone();
        project(&mut y);
        Self { reps, cols, y }
    }

    fn apply(&self, a: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.y.len()];
        for (c, &w) in self.cols.iter().zip(a) {
            if w != 0.0 {
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi += w * ci;
                }
            }
        }
        v
    }

    fn correlations(&self, r: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| dot(c, r)).collect()
    }

    fn residual(&self, a: &[f64]) -> Vec<f64> {
        self.y.iter().zip(self.apply(a)).map(|(y, v)| y - v).collect()
    }

    fn objective(&self, a: &[f64], lambda: f64) -> f64 {
        let r = self.residual(a);
        0.5 * dot(&r, &r) + lambda * a.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn lambda_max(&self) -> f64 {
        self.correlations(&self.y).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖G̃‖₂²` by power iteration on `G̃ᵀG̃`.
    fn lipschitz(&self) -> f64 {
        let k = self.cols.len();
        if k == 0 {
            return 1.0;
        }
        let mut v = vec![1.0 / (k as f64).sqrt(); k];
        let mut est = 0.0;
        for _ in 0..200 {
            let w = self.correlations(&self.apply(&v));
            let nw = norm2(&w);
            if nw == 0.0 {
                return 1.0;
            }
            let next = nw;
            v = w.into_iter().map(|x| x / nw).collect();
            if (next - est).abs() <= 1e-12 * next {
                est = next;
                break;
            }
            est = next;
        }
        est * 1.01
    }
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// FISTA with gradient-based restart. Returns the iterate and whether the
/// stopping rule was met.
fn fista(red: &Reduced, lambda: f64, l: f64, a0: Vec<f64>, opts: &PenalizedOptions, iters: &mut usize) -> (Vec<f64>, bool) {
    let mut x = a0;
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut history: Vec<f64> = vec![red.objective(&x, lambda)];
    for _ in 0..opts.max_iter {
        *iters += 1;
        let r = red.residual(&z);
        let grad = red.correlations(&r);
        let next: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| soft(zi + gi / l, lambda / l)).collect();
        let restart = z
            .iter()
            .zip(&next)
            .zip(&x)
            .map(|((zi, ni), xi)| (zi - ni) * (ni - xi))
            .sum::<f64>()
            > 0.0;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let beta = if restart { 0.0 } else { (t - 1.0) / t_next };
        z = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
        x = next;
        t = t_next;
        let f = red.objective(&x, lambda);
        history.push(f);
        if history.len() > opts.window {
            let old = history[history.len() - 1 - opts.window];
            if (old - f).abs() <= opts.tol * f.abs().max(f64::MIN_POSITIVE) {
                return (x, true);
            }
        }
    }
    (x, false)
}

const ACTIVE_SET_CAP: usize = 1000;

/// Active-set refinement on the split form `a = z⁺ - z⁻`, `z ≥ 0`, with
/// objective `½‖ỹ - G̃(z⁺ - z⁻)‖² + λ Σ z`. Singular passive sets are
/// reduced along null directions of the fit that lower `Σ z`. Returns the
/// refined weights and whether both optimality conditions hold.
fn polish(red: &Reduced, lambda: f64, a: Vec<f64>, iters: &mut usize) -> (Vec<f64>, bool) {
    let k = a.len();
    let column = |v: usize| -> (&[f64], f64) {
        if v < k {
            (&red.cols[v], 1.0)
        } else {
            (&red.cols[v - k], -1.0)
        }
    };
    let weights = |z: &[f64]| -> Vec<f64> { (0..k).map(|j| z[j] - z[j + k]).collect() };
    let mut z = vec![0.0; 2 * k];
    for (j, &v) in a.iter().enumerate() {
        if v > 0.0 {
            z[j] = v;
        } else if v < 0.0 {
            z[j + k] = -v;
        }
    }
    let mut passive: Vec<usize> = (0..2 * k).filter(|&v| z[v] > 0.0).collect();
    let ytg: Vec<f64> = red.correlations(&red.y);
    let tol = 1e-9 * lambda + 1e-13;

    for _ in 0..ACTIVE_SET_CAP {
        for _ in 0..ACTIVE_SET_CAP {
            *iters += 1;
            if passive.is_empty() {
                break;
            }
            let np = passive.len();
            let gram = Matrix::from_fn(np, np, |i, j| {
                let (ci, si) = column(passive[i]);
                let (cj, sj) = column(passive[j]);
                si * sj * dot(ci, cj)
            });
            let rhs: Vec<f64> = passive
                .iter()
                .map(|&v| {
                    let s = if v < k { 1.0 } else { -1.0 };
                    s * ytg[v % k] - lambda
                })
                .collect();
            let (vals, vecs) = symmetric_eigen(&gram);
            let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut null_ones = vec![0.0; np];
            let mut x = vec![0.0; np];
            for (e, &ev) in vals.iter().enumerate() {
                let u: Vec<f64> = (0..np).map(|i| vecs[(i, e)]).collect();
                if ev > 1e-10 * top {
                    let c = dot(&u, &rhs) / ev;
                    x.iter_mut().zip(&u).for_each(|(xi, ui)| *xi += c * ui);
                } else {
                    let c: f64 = u.iter().sum();
                    null_ones.iter_mut().zip(&u).for_each(|(ni, ui)| *ni += c * ui);
                }
            }
            let step_to = |z: &mut Vec<f64>, passive: &mut Vec<usize>, dir: &[f64], t: f64, hit: usize| {
                for (i, &v) in passive.iter().enumerate() {
                    z[v] = (z[v] + t * dir[i]).max(0.0);
                }
                z[passive[hit]] = 0.0;
                passive.retain(|&v| z[v] > 0.0);
            };
            if dot(&null_ones, &null_ones) > 1e-20 * np as f64 {
                // the fit is unchanged along -null_ones while Σ z decreases
                let dir: Vec<f64> = null_ones.iter().map(|v| -v).collect();
                let hit = (0..np)
                    .filter(|&i| dir[i] < 0.0)
                    .min_by(|&i, &j| (z[passive[i]] / -dir[i]).total_cmp(&(z[passive[j]] / -dir[j])));
                let Some(hit) = hit else { break };
                let t = z[passive[hit]] / -dir[hit];
                step_to(&mut z, &mut passive, &dir, t, hit);
                continue;
            }
            if x.iter().all(|&v| v > 0.0) {
                for (i, &v) in passive.iter().enumerate() {
                    z[v] = x[i];
                }
                break;
            }
            let dir: Vec<f64> = passive.iter().zip(&x).map(|(&v, xi)| xi - z[v]).collect();
            let hit = (0..np)
                .filter(|&i| x[i] <= 0.0)
                .min_by(|&i, &j| {
                    let ri = z[passive[i]] / (z[passive[i]] - x[i]);
                    let rj = z[passive[j]] / (z[passive[j]] - x[j]);
                    ri.total_cmp(&rj)
                })
                .expect("a nonpositive coordinate");
            let t = z[passive[hit]] / (z[passive[hit]] - x[hit]);
            step_to(&mut z, &mut passive, &dir, t, hit);
        }

        let corr = red.correlations(&red.residual(&weights(&z)));
        let w = |v: usize| if v < k { corr[v] - lambda } else { -corr[v - k] - lambda };
        let on_support = passive.iter().all(|&v| w(v).abs() <= tol);
        let violator = (0..2 * k)
            .filter(|&v| z[v] == 0.0 && w(v) > tol)
            .max_by(|&p, &q| w(p).total_cmp(&w(q)).then(q.cmp(&p)));
        match violator {
            None => return (weights(&z), on_support),
            Some(v) => {
                passive.push(v);
                passive.sort_unstable();
            }
        }
    }
    (weights(&z), false)
}

/// `min ½‖y - G a - P b‖² + λ‖a‖₁` with `b` unpenalized.
pub fn solve_penalized(problem: &DiscretizedProblem, lambda: f64) -> Result<SolveReport> {
    solve_penalized_with(problem, lambda, PenalizedOptions::default())
}

pub fn solve_penalized_with(problem: &DiscretizedProblem, lambda: f64, opts: PenalizedOptions) -> Result<SolveReport> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("penalty must be positive, got {lambda}")));
    }
    let red = Reduced::new(problem);
    let lmax = red.lambda_max();
    let k = red.reps.len();
    let mut iters = 0;
    let mut a = vec![0.0; k];
    let mut certified = true;
    if lambda < lmax {
        let l = red.lipschitz();
        let stages: Vec<f64> = if opts.continuation {
            let steps = ((lmax / lambda).log10().ceil() as usize).max(1);
            (1..=steps)
                .map(|s| lmax * (lambda / lmax).powf(s as f64 / steps as f64))
                .collect()
        } else {
            vec![lambda]
        };
        let mut converged = false;
        for &lam in &stages {
            if opts.polish {
                let (x, ok) = polish(&red, lam, a.clone(), &mut iters);
                if ok {
                    a = x;
                    certified = true;
                    converged = false;
                    continue;
                }
            }
            let (x, ok) = fista(&red, lam, l, a, &opts, &mut iters);
            a = x;
            converged = ok;
            certified = false;
            if opts.polish {
                let (x, ok) = polish(&red, lam, a, &mut iters);
                a = x;
                certified = ok;
            }
        }
        if !converged && !certified {
            return Err(Error::MaxIter(iters));
        }
    }
    let av = expand(&red.reps, problem.num_atoms(), &a, &vec![0.0; k]);
    let ga = problem.g.matvec(&av);
    let target: Vec<f64> = problem.y.iter().zip(&ga).map(|(y, g)| y - g).collect();
    let b = null_fit(problem, &target);
    let mut report = SolveReport::new(problem, av, b, iters);
    report.lambda = Some(lambda);
    report.kkt_certified = Some(certified);
    Ok(report)
}

/// `λ` above which the penalized solution has `a = 0`.
pub fn lambda_max(problem: &DiscretizedProblem) -> f64 {
    Reduced::new(problem).lambda_max()
}

/// Residual-matched penalized solve for a ball constraint: the largest `λ`
/// (to relative precision) whose solution satisfies `‖y - G a - P b‖ ≤ ε`.
pub fn solve_constrained(problem: &DiscretizedProblem) -> Result<SolveReport> {
    let epsilon = match &problem.constraint {
        ConstraintSet::Point { .. } => return solve_interpolation_lp(problem),
        ConstraintSet::Ball { epsilon, .. } => *epsilon,
        ConstraintSet::Box { .. } => return solve_box_lp(problem),
    };
    let lmax = lambda_max(problem);
    let zero = {
        let b = null_fit(problem, &problem.y);
        let mut r = SolveReport::new(problem, vec![0.0; problem.num_atoms()], b, 0);
        r.lambda = Some(lmax);
        r.kkt_certified = Some(true);
        r
    };
    if zero.residual <= epsilon || lmax == 0.0 {
        return Ok(zero);
    }
    let mut lo = lmax * 1e-12;
    let mut lo_report = solve_penalized(problem, lo)?;
    if lo_report.residual > epsilon {
        return Err(Error::BracketFailure {
            epsilon,
            best: lo_report.residual,
        });
    }
    let mut hi = lmax;
    for _ in 0..60 {
        if (lo_report.residual - epsilon).abs() <= 1e-4 * epsilon {
            break;
        }
        let mid = (lo * hi).sqrt();
        let r = solve_penalized(problem, mid)?;
        if r.residual <= epsilon {
            lo = mid;
            lo_report = r;
        } else {
            hi = mid;
        }
    }
    Ok(lo_report)
}

// ---------------------------------------------------------------- oracle

/// Exhaustive search over linearly independent column subsets of `[G P]`
/// of size at most `M`; exact for desk-sized problems.
pub fn lp_oracle_bruteforce(problem: &DiscretizedProblem) -> Result<SolveReport> {
    let y = match &problem.constraint {
        ConstraintSet::Point { y } => y.clone(),
        other => return Err(Error::InvalidConstraint(format!("oracle needs a point constraint, got {other:?}"))),
    };
    let (m, n, n0) = (problem.num_measurements(), problem.num_atoms(), problem.nullspace_dim());
    if n + n0 > 25 || m > 6 {
        return Err(Error::TooLarge(format!("{n} atoms + {n0} null columns with {m} measurements")));
    }
    let full = problem.system_matrix();
    let total = n + n0;
    let tol = 1e-9 * norm2(&y).max(1.0);
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut visited = 0usize;
    let mut subset: Vec<usize> = Vec::new();
    let max_size = m.min(total);
    fn next_subset(s: &mut Vec<usize>, total: usize, max_size: usize) -> bool {
        if s.len() < max_size {
            let start = s.last().map_or(0, |&v| v + 1);
            if start < total {
                s.push(start);
                return true;
            }
        }
        while let Some(last) = s.pop() {
            if last + 1 < total {
                s.push(last + 1);
                return true;
            }
        }
        false
    }
    loop {
        visited += 1;
        let coeffs = if subset.is_empty() {
            Some(Vec::new())
        } else {
            least_squares(&full.select_columns(&subset), &y, 1e-10)
        };
        if let Some(c) = coeffs {
            let mut fit = vec![0.0; m];
            for (&j, &cj) in subset.iter().zip(&c) {
                for (i, f) in fit.iter_mut().enumerate() {
                    *f += cj * full[(i, j)];
                }
            }
            if norm2(&crate::linalg::sub(&fit, &y)) <= tol {
                let beta: f64 = subset.iter().zip(&c).filter(|(j, _)| **j < n).map(|(_, v)| v.abs()).sum();
                if best.as_ref().is_none_or(|b| beta < b.0 - 1e-15) {
                    best = Some((beta, subset.clone(), c));
                }
            }
        }
        if !next_subset(&mut subset, total, max_size) {
            break;
        }
    }
    let (_, cols, c) = best.ok_or(Error::InfeasibleProblem { residual: f64::NAN })?;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n0];
    for (&j, v) in cols.iter().zip(c) {
        if j < n {
            a[j] = v;
        } else {
            b[j - n] = v;
        }
    }
    Ok(SolveReport::new(problem, a, b, visited))
}

// ---------------------------------------------------------------- pruning

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PruneOptions {
    /// Atoms with `|a_n| < weight_tol · max|a|` are dropped.
    pub weight_tol: f64,
    /// Same-sign atoms closer than this many grid steps are merged.
    pub merge_radius: f64,
}

impl Default for PruneOptions {
    fn default() -> Self {
        Self {
            weight_tol: WEIGHT_TOL,
            merge_radius: MERGE_RADIUS,
        }
    }
}

/// Extracts the innovation `Σ a_k δ(· - x_k)` from a grid solution. Chains
/// of same-sign atoms with gaps of at most `merge_radius` grid steps become
/// one knot at their weight-weighted centroid carrying the summed weight.
pub fn prune_knots(report: &SolveReport, grid: &[Point], opts: PruneOptions) -> Result<DiscreteMeasure> {
    if report.a.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!("{} weights on a {}-point grid", report.a.len(), grid.len())));
    }
    let amax = report.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let active: Vec<usize> = (0..grid.len())
        .filter(|&j| report.a[j] != 0.0 && report.a[j].abs() >= opts.weight_tol * amax)
        .collect();
    let step = crate::problem::grid_step(grid);
    let reach = opts.merge_radius * step * (1.0 + 1e-9);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &j in &active {
        let sign = report.a[j].signum();
        let home = clusters.iter_mut().rev().find(|c| {
            report.a[c[0]].signum() == sign && c.iter().any(|&i| grid[i].distance(grid[j]) <= reach)
        });
        match home {
            Some(c) => c.push(j),
            None => clusters.push(vec![j]),
        }
    }
    let atoms = clusters
        .iter()
        .map(|c| {
            let w: f64 = c.iter().map(|&j| report.a[j]).sum();
            let mass: f64 = c.iter().map(|&j| report.a[j].abs()).sum();
            let cx = c.iter().map(|&j| report.a[j].abs() * grid[j].x()).sum::<f64>() / mass;
            let loc = match grid[c[0]] {
                Point::Line(_) => Point::Line(cx),
                Point::Plane(_) => {
                    let cy = c.iter().map(|&j| report.a[j].abs() * grid[j].y()).sum::<f64>() / mass;
                    Point::Plane([cx, cy])
                }
            };
            (loc, w)
        })
        .collect();
    DiscreteMeasure::new(atoms)
}
