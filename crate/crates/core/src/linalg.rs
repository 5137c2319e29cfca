//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reciprocal 2-norm condition number `σ_min / σ_max`. Empty matrices are
/// perfectly conditioned; the zero matrix has reciprocal condition 0.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if !(max > 0.0) || !max.is_finite() {
        return 0.0;
    }
    sv.min() / max
}

/// Solves `m x = rhs`, refusing systems whose reciprocal condition falls
/// below `threshold`. Returns the solution and the reciprocal condition.
pub fn solve_conditioned(
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
    threshold: f64,
) -> Result<(DVector<f64>, f64)> {
    let rcond = reciprocal_condition(m);
    if rcond < threshold {
        return Err(Error::Excitation { rcond, threshold });
    }
    if m.is_empty() {
        return Ok((DVector::zeros(0), rcond));
    }
    let x = m
        .clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular("LU solve failed".into()))?;
    Ok((x, rcond))
}

/// Inverse of a square matrix whose LU pivots are all at least `guard` in
/// magnitude.
pub fn guarded_inverse(m: &DMatrix<f64>, guard: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    if let Some(pivot) = u.diagonal().iter().find(|d| d.abs() < guard) {
        return Err(Error::Singular(format!("pivot {pivot:.3e} below guard {guard:.0e}")));
    }
    lu.try_inverse()
        .ok_or_else(|| Error::Singular("inverse does not exist".into()))
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral radius via complex eigenvalues.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

/// Coefficients `[1, p₁, …, pₙ]` of `det(zI − m) = zⁿ + p₁ zⁿ⁻¹ + … + pₙ`
/// by the Faddeev–LeVerrier recursion.
pub fn characteristic_polynomial(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = vec![1.0];
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        acc = m * &acc + DMatrix::identity(n, n) * coeffs[k - 1];
        let next = -(m * &acc).trace() / k as f64;
        coeffs.push(next);
    }
    coeffs
}
