//! Linear measurement functionals and their pairings with dictionary atoms
//! `ρ_L(· - τ)` and with null-space functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{NullFunction, Point, SplineAdmissibleOperator};
use crate::quadrature::{integrate, QuadratureRule};

/// Default half-width of the quasi-ideal (triangle) mollifier.
pub const DEFAULT_MOLLIFIER_WIDTH: f64 = 1e-2;

/// Unit-mass aperture profile with compact support, centred at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Profile {
    /// `1/width` on `[-width/2, width/2]`.
    Box { width: f64 },
    /// Symmetric triangle on `[-half_width, half_width]`.
    Triangle { half_width: f64 },
    /// Normal density truncated at `±cutoff·sigma` (not renormalized).
    Gaussian { sigma: f64, cutoff: f64 },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Box { width } => {
                if t.abs() <= 0.5 * width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            Profile::Triangle { half_width } => {
                let a = t.abs();
                if a < half_width {
                    (1.0 - a / half_width) / half_width
                } else {
                    0.0
                }
            }
            Profile::Gaussian { sigma, cutoff } => {
                if t.abs() <= cutoff * sigma {
                    (-0.5 * (t / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
                } else {
                    0.0
                }
            }
        }
    }

    pub fn half_extent(&self) -> f64 {
        match *self {
            Profile::Box { width } => 0.5 * width,
            Profile::Triangle { half_width } => half_width,
            Profile::Gaussian { sigma, cutoff } => sigma * cutoff,
        }
    }

    /// Offsets where the profile is not smooth.
    fn kinks(&self) -> Vec<f64> {
        let e = self.half_extent();
        match self {
            Profile::Triangle { .. } => vec![-e, 0.0, e],
            _ => vec![-e, e],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Profile::Box { width } => width > 0.0 && width.is_finite(),
            Profile::Triangle { half_width } => half_width > 0.0 && half_width.is_finite(),
            Profile::Gaussian { sigma, cutoff } => sigma > 0.0 && cutoff > 0.0 && (sigma * cutoff).is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("profile must have a positive finite support: {self:?}")))
        }
    }
}

/// Weight function of an integral functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum WeightFn {
    Monomial { power: u32 },
    Cosine { frequency: f64, phase: f64 },
    Gaussian { center: f64, sigma: f64 },
    /// `Σ c_i w_i`.
    Sum { terms: Vec<(f64, WeightFn)> },
}

impl WeightFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightFn::Monomial { power } => x.powi(*power as i32),
            WeightFn::Cosine { frequency, phase } => (frequency * x + phase).cos(),
            WeightFn::Gaussian { center, sigma } => (-0.5 * ((x - center) / sigma).powi(2)).exp(),
            WeightFn::Sum { terms } => terms.iter().map(|(c, w)| c * w.eval(x)).sum(),
        }
    }
}

/// One linear measurement `ν_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Functional {
    /// `f ↦ f(at)`.
    IdealSample { at: Point },
    /// Sampling through a unit-mass triangle of half-width `width`.
    QuasiIdealSample { at: f64, width: f64 },
    /// `f ↦ ∫ profile(x - at) f(x) dx`.
    ApertureSample { at: f64, profile: Profile },
    /// `f ↦ f^{(order)}(at)`.
    DerivativeAtPoint { at: f64, order: u32 },
    /// `f ↦ ∫_lo^hi weight(x) f(x) dx`.
    WeightedIntegral { weight: WeightFn, lo: f64, hi: f64 },
}

impl Functional {
    pub fn ideal(at: impl Into<Point>) -> Self {
        Functional::IdealSample { at: at.into() }
    }

    pub fn quasi_ideal(at: f64) -> Self {
        Functional::QuasiIdealSample {
            at,
            width: DEFAULT_MOLLIFIER_WIDTH,
        }
    }

    pub fn derivative_at(at: f64, order: u32) -> Self {
        Functional::DerivativeAtPoint { at, order }
    }

    pub fn moment(power: u32, lo: f64, hi: f64) -> Self {
        Functional::WeightedIntegral {
            weight: WeightFn::Monomial { power },
            lo,
            hi,
        }
    }

    /// A point sample appropriate for `op`: ideal when the Green's function
    /// is Hölder continuous, quasi-ideal otherwise.
    pub fn sample_for(op: &SplineAdmissibleOperator, at: f64) -> Self {
        if op.holder_exponent() > 0.0 {
            Self::ideal(at)
        } else {
            Self::quasi_ideal(at)
        }
    }

    /// Centre of the functional (1-D).
    pub fn location(&self) -> f64 {
        match self {
            Functional::IdealSample { at } => at.x(),
            Functional::QuasiIdealSample { at, .. }
            | Functional::ApertureSample { at, .. }
            | Functional::DerivativeAtPoint { at, .. } => *at,
            Functional::WeightedIntegral { lo, hi, .. } => 0.5 * (lo + hi),
        }
    }

    /// Closed support `[lo, hi]` (1-D).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Functional::IdealSample { at } => (at.x(), at.x()),
            Functional::DerivativeAtPoint { at, .. } => (*at, *at),
            Functional::QuasiIdealSample { at, width } => (at - width, at + width),
            Functional::ApertureSample { at, profile } => {
                let e = profile.half_extent();
                (at - e, at + e)
            }
            Functional::WeightedIntegral { lo, hi, .. } => (*lo, *hi),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            Functional::QuasiIdealSample { at, width } => vec![at - width, *at, at + width],
            Functional::ApertureSample { at, profile } => profile.kinks().into_iter().map(|k| at + k).collect(),
            Functional::WeightedIntegral { lo, hi, .. } => vec![*lo, *hi],
            _ => Vec::new(),
        }
    }

    /// Density of integral-type functionals; `None` for point functionals.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Functional::QuasiIdealSample { at, width } => Some(Profile::Triangle { half_width: *width }.eval(x - at)),
            Functional::ApertureSample { at, profile } => Some(profile.eval(x - at)),
            Functional::WeightedIntegral { weight, lo, hi } => {
                Some(if x >= *lo && x <= *hi { weight.eval(x) } else { 0.0 })
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Functional::IdealSample { at } => {
                if at.x().is_finite() && at.y().is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("non-finite sample location".into()))
                }
            }
            Functional::QuasiIdealSample { at, width } => {
                if at.is_finite() && *width > 0.0 && width.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("quasi-ideal sample needs a positive width, got {width}")))
                }
            }
            Functional::ApertureSample { at, profile } => {
                if !at.is_finite() {
                    return Err(Error::InvalidInput("non-finite aperture location".into()));
                }
                profile.validate()
            }
            Functional::DerivativeAtPoint { at, .. } => {
                if at.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("non-finite derivative location".into()))
                }
            }
            Functional::WeightedIntegral { lo, hi, .. } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("weighted integral needs finite lo < hi, got [{lo}, {hi}]")))
                }
            }
        }
    }

    /// Whether pairing with the atoms `ρ_L(· - τ)` is well defined.
    pub fn admissible_for(&self, op: &SplineAdmissibleOperator) -> Result<()> {
        self.validate()?;
        let point = matches!(self, Functional::IdealSample { .. });
        if op.dimension() == 2 && !point {
            return Err(Error::InadmissibleFunctional(
                "only ideal samples are supported for 2-D operators".into(),
            ));
        }
        if op.is_identity() {
            return match self {
                Functional::IdealSample { .. } | Functional::DerivativeAtPoint { .. } => Err(
                    Error::InadmissibleFunctional("point functionals cannot observe a measure".into()),
                ),
                _ => Ok(()),
            };
        }
        match self {
            Functional::IdealSample { .. } if op.holder_exponent() <= 0.0 => Err(Error::InadmissibleFunctional(
                format!("ideal sampling needs a Hölder-continuous Green's function; use a quasi-ideal sample for {op}"),
            )),
            Functional::DerivativeAtPoint { order, .. } if (*order as f64) >= op.holder_exponent() => {
                Err(Error::InadmissibleFunctional(format!(
                    "derivative of order {order} of the Green's function of {op} is not continuous"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `⟨ν, ρ_L(· - τ)⟩`, or `ν(τ)` in measure mode.
    pub fn act_on_atom(&self, op: &SplineAdmissibleOperator, tau: impl Into<Point>) -> Result<f64> {
        self.admissible_for(op)?;
        self.pair_atom(op, tau.into(), QuadratureRule::default())
    }

    /// Atom pairing without the admissibility check, with an explicit
    /// quadrature rule.
    pub fn pair_atom(&self, op: &SplineAdmissibleOperator, tau: Point, rule: QuadratureRule) -> Result<f64> {
        if op.is_identity() {
            return self.density(tau.x()).ok_or_else(|| {
                Error::InadmissibleFunctional("point functionals cannot observe a measure".into())
            });
        }
        match self {
            Functional::IdealSample { at } => op.green_eval(at.minus(tau)),
            Functional::DerivativeAtPoint { at, order } => op.green_derivative(at - tau.x(), *order),
            _ => {
                if op.dimension() != 1 || tau.dim() != 1 {
                    return Err(Error::DimensionMismatch("integral functionals are 1-D only".into()));
                }
                let t = tau.x();
                let (lo, hi) = self.support();
                let mut kinks = self.kinks();
                kinks.push(t);
                integrate(
                    |x| {
                        let d = self.density(x).unwrap_or(0.0);
                        if d == 0.0 {
                            return 0.0;
                        }
                        d * op.green_eval(x - t).unwrap_or(f64::NAN)
                    },
                    lo,
                    hi,
                    &kinks,
                    rule,
                )
            }
        }
    }

    /// `⟨ν, p⟩` for a null-space function.
    pub fn act_on_null(&self, p: &NullFunction) -> Result<f64> {
        self.act_on_null_with(p, QuadratureRule::default())
    }

    pub fn act_on_null_with(&self, p: &NullFunction, rule: QuadratureRule) -> Result<f64> {
        match self {
            Functional::IdealSample { at } => Ok(p.eval(*at)),
            Functional::DerivativeAtPoint { at, order } => Ok(p.derivative(*at, *order)),
            _ => {
                let (lo, hi) = self.support();
                integrate(
                    |x| self.density(x).unwrap_or(0.0) * p.eval(x),
                    lo,
                    hi,
                    &self.kinks(),
                    rule,
                )
            }
        }
    }

    /// Pairs the functional with an arbitrary 1-D function known by value.
    /// `kinks` lists points where `f` is not smooth. Derivative functionals
    /// are not supported here.
    pub fn apply_to(&self, f: impl Fn(f64) -> f64, kinks: &[f64], rule: QuadratureRule) -> Result<f64> {
        match self {
            Functional::IdealSample { at } => Ok(f(at.x())),
            Functional::DerivativeAtPoint { .. } => Err(Error::InvalidInput(
                "derivative functionals need a structured function".into(),
            )),
            _ => {
                let (lo, hi) = self.support();
                let mut k = self.kinks();
                k.extend_from_slice(kinks);
                integrate(|x| self.density(x).unwrap_or(0.0) * f(x), lo, hi, &k, rule)
            }
        }
    }

    /// Weighted `L₁` norm `∫ |ν(x)| (1 + |x|)^{n₀} dx`. Point functionals
    /// return the weight at their location; admissibility of ideal samples
    /// is decided by the Hölder rule in [`Functional::admissible_for`].
    pub fn decay_admissible(&self, n0: i32) -> (bool, f64) {
        let w = |x: f64| (1.0 + x.abs()).powi(n0);
        match self {
            Functional::IdealSample { at } => (true, (1.0 + at.norm()).powi(n0)),
            Functional::DerivativeAtPoint { at, .. } => (true, w(*at)),
            _ => {
                let (lo, hi) = self.support();
                let mut kinks = self.kinks();
                kinks.push(0.0);
                match integrate(
                    |x| self.density(x).unwrap_or(0.0).abs() * w(x),
                    lo,
                    hi,
                    &kinks,
                    QuadratureRule::default(),
                ) {
                    Ok(v) if v.is_finite() => (true, v),
                    _ => (false, f64::INFINITY),
                }
            }
        }
    }
}

/// A finite linear combination `Σ c_j ν_j` of functionals, used for
/// boundary functionals built from measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub terms: Vec<(f64, Functional)>,
}

impl Combination {
    pub fn single(f: Functional) -> Self {
        Self { terms: vec![(1.0, f)] }
    }

    pub fn pair_atom(&self, op: &SplineAdmissibleOperator, tau: Point) -> Result<f64> {
        self.terms
            .iter()
            .map(|(c, f)| Ok(c * f.pair_atom(op, tau, QuadratureRule::default())?))
            .sum()
    }

    pub fn act_on_null(&self, p: &NullFunction) -> Result<f64> {
        self.terms.iter().map(|(c, f)| Ok(c * f.act_on_null(p)?)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(n: usize) -> SplineAdmissibleOperator {
        SplineAdmissibleOperator::derivative(n).unwrap()
    }

    #[test]
    fn ideal_sample_on_atoms() {
        assert_eq!(Functional::ideal(2.0).act_on_atom(&d(2), 1.0).unwrap(), 1.0);
        assert_eq!(Functional::ideal(0.5).act_on_atom(&d(2), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ideal_sample_rejected_for_step_kernel() {
        assert!(matches!(
            Functional::ideal(0.5).act_on_atom(&d(1), 0.0),
            Err(Error::InadmissibleFunctional(_))
        ));
        assert!(matches!(Functional::sample_for(&d(1), 0.5), Functional::QuasiIdealSample { .. }));
        assert!(matches!(Functional::sample_for(&d(2), 0.5), Functional::IdealSample { .. }));
    }

    #[test]
    fn box_aperture_on_heaviside() {
        let nu = Functional::ApertureSample {
            at: 2.0,
            profile: Profile::Box { width: 1.0 },
        };
        assert_abs_diff_eq!(nu.act_on_atom(&d(1), 0.0).unwrap(), 1.0, epsilon = 1e-14);
        // half the box lies right of τ = 2
        assert_abs_diff_eq!(nu.act_on_atom(&d(1), 2.0).unwrap(), 0.5, epsilon = 1e-14);
        // analytic: ∫_{1.5}^{2.5} (x - 2)_+ dx = 1/8
        assert_abs_diff_eq!(nu.act_on_atom(&d(2), 2.0).unwrap(), 0.125, epsilon = 1e-14);
    }

    #[test]
    fn null_pairings() {
        assert_eq!(
            Functional::ideal(3.0).act_on_null(&NullFunction::monomial(1)).unwrap(),
            3.0
        );
        assert_eq!(
            Functional::derivative_at(0.0, 1)
                .act_on_null(&NullFunction::monomial(2))
                .unwrap(),
            0.0
        );
        let unit_box = Functional::ApertureSample {
            at: 0.0,
            profile: Profile::Box { width: 1.0 },
        };
        assert_abs_diff_eq!(unit_box.act_on_null(&NullFunction::monomial(0)).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn derivative_functionals_on_atoms() {
        // d/dx (x - 1)_+^2 / 2 at x = 3 -> 2
        assert_abs_diff_eq!(
            Functional::derivative_at(3.0, 1).act_on_atom(&d(3), 1.0).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        assert!(Functional::derivative_at(3.0, 1).act_on_atom(&d(2), 1.0).is_err());
    }

    #[test]
    fn decay_estimates() {
        let nu = Functional::ApertureSample {
            at: 10.0,
            profile: Profile::Box { width: 1.0 },
        };
        let (ok, est) = nu.decay_admissible(1);
        assert!(ok);
        assert_abs_diff_eq!(est, 11.0, epsilon = 1e-12);
        let g = Functional::ApertureSample {
            at: -3.0,
            profile: Profile::Gaussian { sigma: 0.5, cutoff: 6.0 },
        };
        let (ok, est) = g.decay_admissible(2);
        assert!(ok && est.is_finite());
        // oracle: midpoint rule on a fine grid
        let n = 200_000;
        let (lo, hi) = g.support();
        let h = (hi - lo) / n as f64;
        let mid: f64 = (0..n)
            .map(|i| lo + h * (i as f64 + 0.5))
            .map(|x| g.density(x).unwrap() * (1.0 + x.abs()).powi(2))
            .sum::<f64>()
            * h;
        assert_abs_diff_eq!(est, mid, epsilon = 1e-6);
    }

    #[test]
    fn linearity_of_weighted_integrals() {
        let op = d(2);
        let w1 = WeightFn::Monomial { power: 2 };
        let w2 = WeightFn::Cosine { frequency: 3.0, phase: 0.2 };
        let (a, b) = (1.7, -0.4);
        let nu = |w: WeightFn| Functional::WeightedIntegral { weight: w, lo: -1.0, hi: 2.0 };
        let combo = nu(WeightFn::Sum {
            terms: vec![(a, w1.clone()), (b, w2.clone())],
        });
        for tau in [-2.0, -0.3, 0.7, 1.9, 3.0] {
            let lhs = combo.act_on_atom(&op, tau).unwrap();
            let rhs = a * nu(w1.clone()).act_on_atom(&op, tau).unwrap() + b * nu(w2.clone()).act_on_atom(&op, tau).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn quadrature_converges_under_panel_doubling() {
        let ops = [
            d(1),
            d(3),
            SplineAdmissibleOperator::fractional(1.5).unwrap(),
            SplineAdmissibleOperator::exponential(vec![-1.0, -2.0]).unwrap(),
        ];
        let nus = [
            Functional::quasi_ideal(0.4),
            Functional::ApertureSample {
                at: 1.0,
                profile: Profile::Gaussian { sigma: 0.3, cutoff: 6.0 },
            },
            Functional::moment(3, 0.0, 2.0),
        ];
        for op in &ops {
            for nu in &nus {
                for tau in [-0.5, 0.41, 1.0, 1.37] {
                    let a = nu.pair_atom(op, tau.into(), QuadratureRule::with_panels(4)).unwrap();
                    let b = nu.pair_atom(op, tau.into(), QuadratureRule::with_panels(8)).unwrap();
                    assert!((a - b).abs() < 1e-8, "{op} {nu:?} {tau}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn quasi_ideal_converges_to_ideal() {
        let op = d(2);
        let ideal = Functional::ideal(1.3).act_on_atom(&op, 0.5).unwrap();
        let errs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&w| {
                let q = Functional::QuasiIdealSample { at: 1.3, width: w };
                // apex exactly on the kink is the worst case
                (q.act_on_atom(&op, 1.3 - 0.0).unwrap() - op.green_eval(0.0).unwrap()).abs()
                    + (q.act_on_atom(&op, 0.5).unwrap() - ideal).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        assert!(errs[1] / errs[0] < 0.2 && errs[2] / errs[1] < 0.2);
    }

    #[test]
    fn measure_mode_pairs_with_density() {
        let id = SplineAdmissibleOperator::identity();
        let m = Functional::moment(3, 0.0, 1.0);
        assert_abs_diff_eq!(m.act_on_atom(&id, 0.5).unwrap(), 0.125, epsilon = 1e-15);
        assert_eq!(m.act_on_atom(&id, 1.5).unwrap(), 0.0);
        assert!(Functional::ideal(0.3).act_on_atom(&id, 0.3).is_err());
    }
}
