//! Run configuration: TOML (or JSON) scenario files plus command-line overrides.

use std::path::{Path, PathBuf};

use gtv_core::measurements::{Functional, Profile, DEFAULT_MOLLIFIER_WIDTH};
use gtv_core::problem::{ConstraintSet, GridSpec};
use gtv_core::spline::NonuniformSpline;
use gtv_core::{Point, SplineAdmissibleOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub operator: Option<SplineAdmissibleOperator>,
    #[serde(default)]
    pub measurements: Option<MeasurementSpec>,
    #[serde(default)]
    pub data: Option<DataSpec>,
    #[serde(default)]
    pub constraint: Option<ConstraintSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Refuse problems whose null space is poorly observed.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub verify: VerifySpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Ideal when the Green's function is Hölder continuous, quasi-ideal otherwise.
    #[default]
    Auto,
    Ideal,
    QuasiIdeal,
    Aperture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasurementSpec {
    /// Point samples at the listed abscissas.
    Samples {
        at: Vec<f64>,
        #[serde(default)]
        sampling: Sampling,
        /// Quasi-ideal mollifier half-width.
        #[serde(default)]
        width: Option<f64>,
        /// Aperture profile.
        #[serde(default)]
        profile: Option<Profile>,
    },
    /// Monomial moments `∫_lo^hi x^k f(x) dx` for `k < count`.
    Moments { count: u32, lo: f64, hi: f64 },
    /// Explicit functionals.
    List { items: Vec<Functional> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub knots: Vec<f64>,
    pub weights: Vec<f64>,
    /// Zero when omitted.
    #[serde(default)]
    pub null_coeffs: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default)]
    pub y: Option<Vec<f64>>,
    #[serde(default)]
    pub truth: Option<TruthSpec>,
    /// Standard deviation of additive Gaussian noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstraintSpec {
    Point,
    /// Radius defaults to `noise · √M`.
    Ball {
        #[serde(default)]
        epsilon: Option<f64>,
    },
    Box { half_width: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Exact linear program (point and box constraints).
    Lp,
    Penalized,
    /// Picked from the constraint.
    #[default]
    Constrained,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub kind: SolverKind,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Number of points of an optional log-spaced λ sweep.
    #[serde(default)]
    pub sweep: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default)]
    pub shift_invariant: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub strict: bool,
    pub shift_invariant: bool,
}

impl RunConfig {
    /// TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("JSON config: {e}")))
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(format!("TOML config: {e}")))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.data.get_or_insert_with(DataSpec::default).seed = Some(seed);
        }
        if let Some(n) = o.grid_n {
            match &mut self.grid {
                GridSpec::Auto { n: slot, .. } => *slot = Some(n),
                GridSpec::Line { n: slot, .. } => *slot = n,
                GridSpec::Plane { .. } => {
                    return Err(CliError::Config("--grid-n does not apply to a plane grid".into()))
                }
            }
        }
        if let Some(lambda) = o.lambda {
            self.solver.kind = SolverKind::Penalized;
            self.solver.lambda = Some(lambda);
        }
        if let Some(epsilon) = o.epsilon {
            self.constraint = Some(ConstraintSpec::Ball { epsilon: Some(epsilon) });
        }
        self.strict |= o.strict;
        self.verify.shift_invariant |= o.shift_invariant;
        Ok(())
    }

    pub fn operator(&self) -> Result<&SplineAdmissibleOperator, CliError> {
        self.operator.as_ref().ok_or_else(|| CliError::Config("missing [operator]".into()))
    }

    pub fn functionals(&self, op: &SplineAdmissibleOperator) -> Result<Vec<Functional>, CliError> {
        let spec = self
            .measurements
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [measurements]".into()))?;
        let nus = match spec {
            MeasurementSpec::Samples {
                at,
                sampling,
                width,
                profile,
            } => at
                .iter()
                .map(|&x| {
                    Ok(match sampling {
                        Sampling::Auto => Functional::sample_for(op, x),
                        Sampling::Ideal => Functional::ideal(x),
                        Sampling::QuasiIdeal => Functional::QuasiIdealSample {
                            at: x,
                            width: width.unwrap_or(DEFAULT_MOLLIFIER_WIDTH),
                        },
                        Sampling::Aperture => Functional::ApertureSample {
                            at: x,
                            profile: profile
                                .clone()
                                .ok_or_else(|| CliError::Config("aperture sampling needs a profile".into()))?,
                        },
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?,
            MeasurementSpec::Moments { count, lo, hi } => (0..*count).map(|k| Functional::moment(k, *lo, *hi)).collect(),
            MeasurementSpec::List { items } => items.clone(),
        };
        for nu in &nus {
            nu.validate()?;
        }
        Ok(nus)
    }

    /// Ground-truth spline of the data generator, if any.
    pub fn truth(&self, op: &SplineAdmissibleOperator) -> Result<Option<NonuniformSpline>, CliError> {
        let Some(t) = self.data.as_ref().and_then(|d| d.truth.as_ref()) else {
            return Ok(None);
        };
        let null = if t.null_coeffs.is_empty() {
            vec![0.0; op.nullspace_dim()]
        } else {
            t.null_coeffs.clone()
        };
        let knots = t.knots.iter().map(|&k| Point::from(k)).collect();
        Ok(Some(NonuniformSpline::new(op.clone(), knots, t.weights.clone(), null)?))
    }

    /// Data vector: given directly, or measured from the ground truth with
    /// seeded Gaussian noise.
    pub fn data(&self, op: &SplineAdmissibleOperator, nus: &[Functional]) -> Result<Vec<f64>, CliError> {
        let spec = self.data.as_ref().ok_or_else(|| CliError::Config("missing [data]".into()))?;
        if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
            return Err(CliError::Config(format!("noise must be >= 0, got {}", spec.noise)));
        }
        let mut y = match (&spec.y, self.truth(op)?) {
            (Some(y), None) => y.clone(),
            (None, Some(s)) => s.measure(nus)?,
            (Some(_), Some(_)) => return Err(CliError::Config("give either data.y or data.truth, not both".into())),
            (None, None) => return Err(CliError::Config("data needs y or truth".into())),
        };
        if y.len() != nus.len() {
            return Err(CliError::Config(format!("{} data values for {} measurements", y.len(), nus.len())));
        }
        if spec.noise > 0.0 {
            let seed = spec
                .seed
                .ok_or_else(|| CliError::Config("a seed is required when noise > 0".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in &mut y {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += spec.noise * z;
            }
        }
        Ok(y)
    }

    pub fn noise(&self) -> f64 {
        self.data.as_ref().map_or(0.0, |d| d.noise)
    }

    pub fn constraint_set(&self, y: Vec<f64>, default: ConstraintSpec) -> Result<ConstraintSet, CliError> {
        let m = y.len() as f64;
        let set = match self.constraint.clone().unwrap_or(default) {
            ConstraintSpec::Point => ConstraintSet::point(y),
            ConstraintSpec::Ball { epsilon } => {
                let eps = epsilon.unwrap_or(self.noise() * m.sqrt());
                ConstraintSet::ball(y, eps)?
            }
            ConstraintSpec::Box { half_width } => {
                let lo = y.iter().map(|v| v - half_width).collect();
                let hi = y.iter().map(|v| v + half_width).collect();
                ConstraintSet::boxed(lo, hi)?
            }
        };
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HAT: &str = r#"
[operator]
kind = "derivative"
order = 2

[measurements]
kind = "samples"
at = [0.0, 1.0, 2.0]

[data]
y = [0.0, 1.0, 0.0]

[grid]
kind = "line"
lo = -0.5
hi = 2.5
n = 201
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = RunConfig::parse(HAT).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b = RunConfig::parse(&json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.operator.unwrap(), SplineAdmissibleOperator::derivative(2).unwrap());
        assert_eq!(a.grid, GridSpec::line(-0.5, 2.5, 201));
        assert_eq!(a.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("bogus = 1\n{HAT}");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::parse(HAT).unwrap();
        c.apply(&Overrides {
            grid_n: Some(51),
            lambda: Some(0.5),
            epsilon: Some(0.1),
            seed: Some(9),
            strict: true,
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(c.grid, GridSpec::line(-0.5, 2.5, 51));
        assert_eq!(c.solver.kind, SolverKind::Penalized);
        assert_eq!(c.constraint, Some(ConstraintSpec::Ball { epsilon: Some(0.1) }));
        assert_eq!(c.data.unwrap().seed, Some(9));
        assert!(c.strict);
    }

    #[test]
    fn noise_needs_a_seed() {
        let text = r#"
operator = { kind = "derivative", order = 1 }
measurements = { kind = "samples", at = [0.1, 0.5, 0.9] }
[data]
noise = 0.1
truth = { knots = [0.3], weights = [1.0], null_coeffs = [0.0] }
"#;
        let c = RunConfig::parse(text).unwrap();
        let op = c.operator().unwrap().clone();
        let nus = c.functionals(&op).unwrap();
        assert!(matches!(c.data(&op, &nus), Err(CliError::Config(_))));
        let mut seeded = c.clone();
        seeded.data.as_mut().unwrap().seed = Some(3);
        let y1 = seeded.data(&op, &nus).unwrap();
        let y2 = seeded.data(&op, &nus).unwrap();
        assert_eq!(y1, y2);
        assert!(y1.iter().zip([0.0, 1.0, 1.0]).any(|(a, b)| a != &b));
    }

    #[test]
    fn truth_generates_clean_data() {
        let text = r#"
operator = { kind = "derivative", order = 1 }
measurements = { kind = "samples", at = [0.1, 0.5, 0.9], sampling = "ideal" }
data = { truth = { knots = [0.3, 0.7], weights = [1.0, -2.0] } }
"#;
        let c = RunConfig::parse(text).unwrap();
        let op = c.operator().unwrap().clone();
        let nus = c.functionals(&op).unwrap();
        assert_eq!(c.data(&op, &nus).unwrap(), vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn moments_and_default_ball_radius() {
        let text = r#"
operator = { kind = "identity" }
measurements = { kind = "moments", count = 4, lo = 0.0, hi = 1.0 }
data = { y = [1.0, 0.5, 0.25, 0.125], noise = 0.0 }
constraint = { kind = "ball" }
"#;
        let c = RunConfig::parse(text).unwrap();
        let op = c.operator().unwrap().clone();
        assert_eq!(c.functionals(&op).unwrap().len(), 4);
        let set = c.constraint_set(vec![1.0; 4], ConstraintSpec::Point).unwrap();
        assert_eq!(set, ConstraintSet::point(vec![1.0; 4]));
    }
}
