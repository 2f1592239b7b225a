//! Continuous-domain signal reconstruction under generalized total-variation
//! regularization `‖L f‖_M`.
//!
//! Solutions are nonuniform L-splines: a few weighted, shifted Green's
//! functions of `L` plus a component in its null space. The crate covers
//! the operator side (Green's functions, null spaces, biorthogonal
//! boundary functionals, stable right inverses), the measurement side
//! (ideal, aperture and integral functionals), a grid discretization, and
//! the solvers (simplex LP for exact data, proximal gradient for the
//! penalized form, and a brute-force vertex oracle for testing).

pub mod biortho;
pub mod error;
pub mod jsonfmt;
pub mod linalg;
pub mod measurements;
pub mod operators;
pub mod problem;
pub mod quadrature;
pub mod rightinv;
pub mod solvers;
pub mod spline;
pub mod verify;

pub use error::{Error, Result};
pub use operators::{OperatorKind, Point, SplineAdmissibleOperator};
