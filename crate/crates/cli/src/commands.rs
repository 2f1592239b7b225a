//! The `gtv` subcommands. Each returns the process exit code.

use std::path::Path;

use gtv_core::jsonfmt::{self, fmt_f64};
use gtv_core::measurements::Functional;
use gtv_core::problem::{build_problem, BuildOptions, ConstraintSet, DiscretizedProblem, FEAS_TOL};
use gtv_core::rightinv::DiscreteMeasure;
use gtv_core::solvers::{
    lambda_max, prune_knots, solve_constrained, solve_penalized, PruneOptions, SolveReport, Status,
};
use gtv_core::spline::NonuniformSpline;
use gtv_core::verify::{verify_operator, VerifyOptions};
use gtv_core::SplineAdmissibleOperator;
use log::{info, warn};

use crate::config::{ConstraintSpec, RunConfig, SolverKind};
use crate::output::{innovation_csv, write, Report};
use crate::{CliError, EXIT_OK, EXIT_VERIFY};

const HAT: &str = include_str!("../../../configs/hat.toml");
const STAIRCASE: &str = include_str!("../../../configs/staircase.toml");
const SPIKES: &str = include_str!("../../../configs/spikes.toml");
const OPERATOR_D2: &str = include_str!("../../../configs/verify_d2.toml");

/// Measurements, data and constraint from the config, discretized on its grid.
pub fn assemble(
    cfg: &RunConfig,
    op: &SplineAdmissibleOperator,
    default: ConstraintSpec,
) -> Result<(Vec<Functional>, DiscretizedProblem), CliError> {
    let nus = cfg.functionals(op)?;
    let y = cfg.data(op, &nus)?;
    let set = cfg.constraint_set(y, default)?;
    let opts = BuildOptions {
        strict: cfg.strict,
        ..BuildOptions::default()
    };
    let problem = build_problem(op, &nus, set, &cfg.grid, opts)?;
    info!(
        "assembled M = {}, N = {}, N0 = {}",
        problem.num_measurements(),
        problem.num_atoms(),
        problem.nullspace_dim()
    );
    Ok((nus, problem))
}

fn penalty(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.solver.lambda {
        Some(l) if l > 0.0 && l.is_finite() => Ok(l),
        Some(l) => Err(CliError::Config(format!("lambda must be positive, got {l}"))),
        None => Err(CliError::Config("the penalized solver needs solver.lambda".into())),
    }
}

fn solve(cfg: &RunConfig, problem: &DiscretizedProblem) -> Result<SolveReport, CliError> {
    let report = match cfg.solver.kind {
        SolverKind::Penalized => solve_penalized(problem, penalty(cfg)?)?,
        SolverKind::Lp if matches!(problem.constraint, ConstraintSet::Ball { .. }) => {
            return Err(CliError::Config("the lp solver takes point or box constraints".into()))
        }
        SolverKind::Lp | SolverKind::Constrained => solve_constrained(problem)?,
    };
    match report.status {
        Status::Infeasible => Err(gtv_core::Error::InfeasibleProblem {
            residual: report.residual,
        }
        .into()),
        Status::MaxIter => {
            warn!("solver stopped at its iteration limit");
            Ok(report)
        }
        _ => Ok(report),
    }
}

fn summary(name: &str, problem: &DiscretizedProblem, report: &SolveReport, knots: usize) -> Report {
    let mut r = Report::default();
    r.row("command", name);
    r.row("operator", &problem.operator);
    r.row("M", problem.num_measurements());
    r.row("N0", problem.nullspace_dim());
    r.row("N", problem.num_atoms());
    r.row("K", knots);
    r.num("beta", report.objective);
    r.num("residual", report.residual);
    match problem.wellposedness {
        Some(b) => r.num("B", b),
        None => r.row("B", "n/a"),
    }
    if let Some(l) = report.lambda {
        r.num("lambda", l);
    }
    r.row("status", format!("{:?}", report.status).to_lowercase());
    r.row("iterations", report.iterations);
    r
}

fn write_solution(dir: &Path, problem: &DiscretizedProblem, report: &SolveReport, spline: &NonuniformSpline) -> Result<(), CliError> {
    write(dir, "spline.json", &spline.to_json()?)?;
    write(dir, "solution.json", &report.to_json()?)?;
    write(dir, "innovation.csv", &innovation_csv(&spline.innovation()))?;
    if problem.operator.dimension() == 1 {
        let xs: Vec<f64> = problem.grid.iter().map(|p| p.x()).collect();
        write(dir, "samples.csv", &spline.to_csv(&xs))?;
    }
    Ok(())
}

fn finish(dir: &Path, report: &Report) -> Result<i32, CliError> {
    let text = report.render();
    write(dir, "report.txt", &text)?;
    print!("{text}");
    Ok(if report.pass() { EXIT_OK } else { EXIT_VERIFY })
}

/// Exact interpolation: point constraint, simplex solve, sparsity check.
pub fn cmd_interpolate(cfg: &RunConfig) -> Result<i32, CliError> {
    if !matches!(cfg.constraint, None | Some(ConstraintSpec::Point)) {
        return Err(CliError::Config("interpolate takes a point constraint".into()));
    }
    if cfg.solver.kind == SolverKind::Penalized {
        return Err(CliError::Config("interpolate uses the lp solver".into()));
    }
    let op = cfg.operator()?;
    let (_, problem) = assemble(cfg, op, ConstraintSpec::Point)?;
    let report = solve(cfg, &problem)?;
    let spline = NonuniformSpline::from_report(&problem, &report, PruneOptions::default())?;
    let (k, m, n0) = (spline.num_knots(), problem.num_measurements(), problem.nullspace_dim());
    let mut r = summary("interpolate", &problem, &report, k);
    if report.null_basic_count == Some(n0) {
        let bound = m.saturating_sub(n0);
        r.check(format!("K <= M - N0 ({k} <= {bound})"), k <= bound);
    } else {
        r.check(format!("K <= M ({k} <= {m}), null space not fully basic"), k <= m);
    }
    r.check(format!("residual <= {}", fmt_f64(FEAS_TOL)), report.residual <= FEAS_TOL);
    let dir = &cfg.output.dir;
    write_solution(dir, &problem, &report, &spline)?;
    finish(dir, &r)
}

/// Denoising: ball constraint or fixed penalty, with an optional λ sweep.
pub fn cmd_denoise(cfg: &RunConfig) -> Result<i32, CliError> {
    let default_op = SplineAdmissibleOperator::derivative(1)?;
    let op = cfg.operator.as_ref().unwrap_or(&default_op);
    let (_, problem) = assemble(cfg, op, ConstraintSpec::Ball { epsilon: None })?;
    let report = solve(cfg, &problem)?;
    let spline = NonuniformSpline::from_report(&problem, &report, PruneOptions::default())?;
    let (k, m) = (spline.num_knots(), problem.num_measurements());
    let mut r = summary("denoise", &problem, &report, k);
    if let Some(truth) = cfg.truth(op)? {
        r.row("true K", truth.num_knots());
    }
    r.check(format!("K <= M ({k} <= {m})"), k <= m);
    if let ConstraintSet::Ball { epsilon, .. } = problem.constraint {
        if cfg.solver.kind != SolverKind::Penalized {
            r.num("epsilon", epsilon);
            r.check("residual <= epsilon".into(), report.residual <= epsilon + FEAS_TOL);
        }
    }
    let dir = &cfg.output.dir;
    if let Some(points) = cfg.solver.sweep {
        sweep(dir, &problem, points, &mut r)?;
    }
    write_solution(dir, &problem, &report, &spline)?;
    finish(dir, &r)
}

/// Penalized solves on `points` log-spaced values from `λ_max·1e-5` to `λ_max`.
fn sweep(dir: &Path, problem: &DiscretizedProblem, points: usize, r: &mut Report) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Config("solver.sweep needs at least 2 points".into()));
    }
    let lmax = lambda_max(problem);
    if lmax <= 0.0 {
        r.row("sweep", "skipped (data in the null space)");
        return Ok(());
    }
    let mut csv = String::from("lambda,residual,beta,knots\n");
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let lambda = lmax * 10f64.powf(-5.0 + 5.0 * i as f64 / (points - 1) as f64);
        let s = solve_penalized(problem, lambda)?;
        let knots = prune_knots(&s, &problem.grid, PruneOptions::default())?.len();
        csv.push_str(&format!(
            "{},{},{},{knots}\n",
            fmt_f64(lambda),
            fmt_f64(s.residual),
            fmt_f64(s.objective)
        ));
        rows.push((s.residual, s.objective, knots, s.a.iter().all(|v| *v == 0.0)));
    }
    write(dir, "lambda_sweep.csv", &csv)?;
    let residual_up = rows.windows(2).all(|w| w[1].0 >= w[0].0 - 1e-9);
    let beta_down = rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    let knots_down = rows.windows(2).all(|w| w[1].2 <= w[0].2);
    r.row("sweep points", points);
    r.row("knots nonincreasing in lambda", if knots_down { "yes" } else { "no" });
    r.check("residual nondecreasing in lambda".into(), residual_up);
    r.check("beta nonincreasing in lambda".into(), beta_down);
    r.check("lambda_max gives the null-space fit (a = 0)".into(), rows[points - 1].3);
    Ok(())
}

/// Sparse measure recovery with `L = I`.
pub fn cmd_recover_measure(cfg: &RunConfig) -> Result<i32, CliError> {
    let op = match &cfg.operator {
        None => SplineAdmissibleOperator::identity(),
        Some(op) if op.is_identity() => op.clone(),
        Some(op) => return Err(CliError::Config(format!("recover-measure needs the identity operator, got {op}"))),
    };
    let (_, problem) = assemble(cfg, &op, ConstraintSpec::Point)?;
    let report = solve(cfg, &problem)?;
    let measure = prune_knots(&report, &problem.grid, PruneOptions::default())?;
    let (k, m) = (measure.len(), problem.num_measurements());
    let mut r = summary("recover-measure", &problem, &report, k);
    if let Some(truth) = cfg.truth(&op)? {
        let truth = truth.innovation();
        r.row("true K", truth.len());
        if let Some((loc, weight)) = atom_errors(&truth, &measure) {
            r.num("max location error", loc);
            r.num("max weight error", weight);
        }
    }
    r.check(format!("K <= M ({k} <= {m})"), k <= m);
    let dir = &cfg.output.dir;
    write(dir, "measure.json", &jsonfmt::to_string(&measure)?)?;
    write(dir, "solution.json", &report.to_json()?)?;
    write(dir, "innovation.csv", &innovation_csv(&measure))?;
    finish(dir, &r)
}

/// Largest location and weight discrepancy between atoms paired in order,
/// when both measures have the same size.
fn atom_errors(truth: &DiscreteMeasure, found: &DiscreteMeasure) -> Option<(f64, f64)> {
    if truth.len() != found.len() {
        return None;
    }
    Some(truth.atoms().iter().zip(found.atoms()).fold((0.0f64, 0.0f64), |(l, w), (a, b)| {
        (l.max(a.0.distance(b.0)), w.max((a.1 - b.1).abs()))
    }))
}

/// Right-inverse and well-posedness checks for one operator.
pub fn cmd_verify_operator(cfg: &RunConfig) -> Result<i32, CliError> {
    let op = cfg.operator()?;
    let opts = VerifyOptions {
        shift_invariant: cfg.verify.shift_invariant,
        seed: cfg.data.as_ref().and_then(|d| d.seed).unwrap_or(0),
    };
    let checks = verify_operator(op, opts)?;
    let mut text = format!("operator  {op}\nkernel    {}\n", if opts.shift_invariant { "shift-invariant" } else { "canonical" });
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        let line = match c.value {
            Some(v) => format!(
                "{:<4}  {:<width$}  {} {} {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                fmt_f64(v),
                c.relation,
                fmt_f64(c.threshold)
            ),
            None => format!("SKIP  {:<width$}", c.name),
        };
        text.push_str(line.trim_end());
        if let Some(note) = &c.note {
            text.push_str(&format!("  ({note})"));
        }
        text.push('\n');
    }
    let dir = &cfg.output.dir;
    write(dir, "verify.json", &jsonfmt::to_string(&checks)?)?;
    write(dir, "report.txt", &text)?;
    print!("{text}");
    Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_VERIFY })
}

/// Runs the bundled scenarios into subdirectories of `out`.
pub fn cmd_demo(out: &Path) -> Result<i32, CliError> {
    type Command = fn(&RunConfig) -> Result<i32, CliError>;
    let runs: [(&str, &str, Command); 4] = [
        ("hat", HAT, cmd_interpolate),
        ("staircase", STAIRCASE, cmd_denoise),
        ("spikes", SPIKES, cmd_recover_measure),
        ("verify_d2", OPERATOR_D2, cmd_verify_operator),
    ];
    let mut code = EXIT_OK;
    for (name, text, run) in runs {
        let mut cfg = RunConfig::parse(text)?;
        cfg.output.dir = out.join(name);
        println!("== {name}");
        code = code.max(run(&cfg)?);
    }
    Ok(code)
}
