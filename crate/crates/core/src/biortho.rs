//! Biorthogonal systems `(φ, p)` for the null space of an operator, the
//! cross-product matrix `P = [ν(p_1) … ν(p_N₀)]`, and the well-posedness
//! bound `σ_min²(P) / σ_max(P)`.

use crate::error::{Error, Result};
use crate::linalg::{least_squares, singular_values, Matrix};
use crate::measurements::{Combination, Functional};
use crate::operators::{NullFunction, NullSpaceBasis, OperatorKind, SplineAdmissibleOperator};

/// Below this singular value a matrix is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Boundary functionals `φ_n` paired with the null-space basis `p_n` so
/// that `φ_m(p_n) = δ_{mn}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiorthogonalSystem {
    operator: SplineAdmissibleOperator,
    functionals: Vec<Combination>,
    basis: NullSpaceBasis,
    canonical_derivatives: bool,
}

impl BiorthogonalSystem {
    pub fn operator(&self) -> &SplineAdmissibleOperator {
        &self.operator
    }

    pub fn functionals(&self) -> &[Combination] {
        &self.functionals
    }

    pub fn basis(&self) -> &NullSpaceBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// True when `φ_n = (-1)^{n-1} δ^{(n-1)}` and `p_n = x^{n-1}/(n-1)!`,
    /// i.e. the boundary conditions pin value and derivatives at the origin
    /// for `D^N`.
    pub fn is_canonical_derivative(&self) -> bool {
        self.canonical_derivatives
    }

    /// Matrix of `φ_m(p_n)`.
    pub fn pairing_matrix(&self) -> Result<Matrix> {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for (i, phi) in self.functionals.iter().enumerate() {
            for (j, p) in self.basis.functions.iter().enumerate() {
                m[(i, j)] = phi.act_on_null(p)?;
            }
        }
        Ok(m)
    }

    /// `max |φ_m(p_n) - δ_{mn}|`.
    pub fn biorthogonality_error(&self) -> Result<f64> {
        let m = self.pairing_matrix()?;
        let mut worst: f64 = 0.0;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m[(i, j)] - target).abs());
            }
        }
        Ok(worst)
    }

    /// `φ(q)` for a null-space element `q`.
    pub fn boundary_values(&self, q: &NullFunction) -> Result<Vec<f64>> {
        self.functionals.iter().map(|phi| phi.act_on_null(q)).collect()
    }
}

/// Canonical system: derivatives at the origin for ODE operators, point
/// evaluations at `(0,0), (1,0), (0,1)` for the thin-plate operator.
pub fn canonical_system(op: &SplineAdmissibleOperator) -> Result<BiorthogonalSystem> {
    let basis = op.nullspace_basis();
    let n0 = basis.len();
    let raw: Vec<Functional> = match op.kind() {
        OperatorKind::Derivative { .. } | OperatorKind::ExponentialOde { .. } => {
            (0..n0).map(|k| Functional::derivative_at(0.0, k as u32)).collect()
        }
        OperatorKind::FractionalDerivative { gamma } if gamma.fract() == 0.0 => {
            (0..n0).map(|k| Functional::derivative_at(0.0, k as u32)).collect()
        }
        OperatorKind::FractionalDerivative { gamma } => {
            return Err(Error::UnsupportedOperator(format!(
                "no canonical boundary functionals for D^{gamma}; build the system from measurements"
            )))
        }
        OperatorKind::ThinPlate2d => vec![
            Functional::ideal([0.0, 0.0]),
            Functional::ideal([1.0, 0.0]),
            Functional::ideal([0.0, 1.0]),
        ],
        OperatorKind::Identity => Vec::new(),
    };
    let canonical_derivatives = matches!(op.kind(), OperatorKind::Derivative { .. })
        || matches!(op.kind(), OperatorKind::FractionalDerivative { gamma } if gamma.fract() == 0.0);
    let p = cross_product_matrix(&raw, &basis)?;
    let functionals = if canonical_derivatives {
        raw.into_iter().map(Combination::single).collect()
    } else {
        biorthogonalize(&raw, &p.0)?
    };
    Ok(BiorthogonalSystem {
        operator: op.clone(),
        functionals,
        basis,
        canonical_derivatives,
    })
}

/// `φ = P₀⁻¹ ν₀` from a square, invertible restriction matrix.
fn biorthogonalize(nus: &[Functional], p0: &Matrix) -> Result<Vec<Combination>> {
    if nus.is_empty() {
        return Ok(Vec::new());
    }
    let sigma_min = singular_values(p0).first().copied().unwrap_or(0.0);
    if sigma_min < RANK_TOL {
        return Err(Error::NullspaceNotIdentifiable { sigma_min });
    }
    let w = p0
        .inverse(0.0)
        .ok_or(Error::NullspaceNotIdentifiable { sigma_min })?;
    Ok((0..w.rows())
        .map(|n| Combination {
            terms: (0..w.cols()).map(|j| (w[(n, j)], nus[j].clone())).collect(),
        })
        .collect())
}

/// Indices of the measurement rows used to pin the null space: rows are
/// scanned in order and kept when their reduced form has a pivot above the
/// threshold (pivot column = largest remaining entry, lowest index on ties).
pub fn select_pivot_rows(p: &Matrix) -> Vec<usize> {
    let n0 = p.cols();
    let scale = p.max_abs().max(1.0);
    let mut pivots: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut rows = Vec::new();
    for i in 0..p.rows() {
        if rows.len() == n0 {
            break;
        }
        let mut r = p.row(i).to_vec();
        for (c, v) in &pivots {
            let f = r[*c];
            if f != 0.0 {
                for (rk, vk) in r.iter_mut().zip(v) {
                    *rk -= f * vk;
                }
            }
        }
        let (col, best) = r
            .iter()
            .enumerate()
            .filter(|(k, _)| !pivots.iter().any(|(c, _)| c == k))
            .fold((usize::MAX, 0.0), |acc, (k, v)| if v.abs() > acc.1 { (k, v.abs()) } else { acc });
        if col != usize::MAX && best > RANK_TOL * scale {
            let piv = r[col];
            pivots.push((col, r.iter().map(|v| v / piv).collect()));
            rows.push(i);
        }
    }
    rows
}

/// Boundary functionals built from the measurements themselves:
/// `φ₀ = P₀⁻¹ ν₀` for an invertible `N₀ × N₀` restriction `P₀`.
pub fn measurement_system(op: &SplineAdmissibleOperator, measurements: &[Functional]) -> Result<BiorthogonalSystem> {
    let basis = op.nullspace_basis();
    let p = cross_product_matrix(measurements, &basis)?;
    let rows = select_pivot_rows(&p.0);
    if rows.len() < basis.len() {
        let sigma_min = singular_values(&p.0).first().copied().unwrap_or(0.0);
        return Err(Error::NullspaceNotIdentifiable { sigma_min });
    }
    let nus: Vec<Functional> = rows.iter().map(|&i| measurements[i].clone()).collect();
    let functionals = biorthogonalize(&nus, &p.0.select_rows(&rows))?;
    Ok(BiorthogonalSystem {
        operator: op.clone(),
        functionals,
        basis,
        canonical_derivatives: false,
    })
}

/// `P[m, n] = ⟨ν_m, p_n⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossProductMatrix(pub Matrix);

pub fn cross_product_matrix(measurements: &[Functional], basis: &NullSpaceBasis) -> Result<CrossProductMatrix> {
    let mut p = Matrix::zeros(measurements.len(), basis.len());
    for (m, nu) in measurements.iter().enumerate() {
        for (n, f) in basis.functions.iter().enumerate() {
            p[(m, n)] = nu.act_on_null(f)?;
        }
    }
    Ok(CrossProductMatrix(p))
}

/// Least-squares null-space coefficients `(PᵀP)⁻¹ Pᵀ y`.
pub fn nullspace_fit(p: &CrossProductMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let p = &p.0;
    if y.len() != p.rows() {
        return Err(Error::DimensionMismatch(format!("{} data values for {} rows", y.len(), p.rows())));
    }
    if p.cols() == 0 {
        return Ok(Vec::new());
    }
    let sigma_min = if p.rows() < p.cols() {
        0.0
    } else {
        singular_values(p)[0]
    };
    if sigma_min <= RANK_TOL {
        return Err(Error::SingularNormalEquations { sigma_min });
    }
    least_squares(p, y, 0.0).ok_or(Error::SingularNormalEquations { sigma_min })
}

/// `B = σ_min²(P) / σ_max(P)`, so that `B‖c‖₂ ≤ ‖Pc‖₂`.
pub fn wellposedness_bound(p: &CrossProductMatrix) -> Result<f64> {
    let p = &p.0;
    if p.cols() == 0 {
        return Err(Error::EmptyNullspace);
    }
    if p.rows() < p.cols() {
        return Ok(0.0);
    }
    let s = singular_values(p);
    let (smin, smax) = (s[0], s[s.len() - 1]);
    if smax == 0.0 {
        return Ok(0.0);
    }
    Ok(smin * smin / smax)
}

/// `q = Σ_n φ_n(f) p_n` given the boundary values `φ_n(f)`.
pub fn project_nullspace(system: &BiorthogonalSystem, boundary_values: &[f64]) -> Result<NullFunction> {
    if boundary_values.len() != system.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} boundary values for a {}-dimensional null space",
            boundary_values.len(),
            system.len()
        )));
    }
    Ok(NullFunction::combine(boundary_values, &system.basis.functions))
}
