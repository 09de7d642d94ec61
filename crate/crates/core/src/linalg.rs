//! Small dense linear algebra layer over `faer`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Col, Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Inverse of a symmetric positive-definite matrix through its Cholesky
/// factor. The result is re-symmetrized.
pub fn spd_inverse(a: MatRef<'_, f64>, what: &str) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Degeneracy(format!("{what} is not positive definite ({e:?})")))?;
    let mut inv = llt.inverse();
    symmetrize_in_place(&mut inv);
    Ok(inv)
}

/// Solve `a x = b` for symmetric positive-definite `a`.
pub fn spd_solve(a: MatRef<'_, f64>, b: &[f64], what: &str) -> Result<Vec<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Degeneracy(format!("{what} is not positive definite ({e:?})")))?;
    let rhs = Col::from_fn(b.len(), |i| b[i]);
    let x = llt.solve(&rhs);
    Ok(col_to_vec(&x))
}

pub fn symmetrize_in_place(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// `a + shift * I` for square `a`.
pub fn add_diagonal(a: MatRef<'_, f64>, shift: f64) -> Mat<f64> {
    let mut out = a.to_owned();
    for i in 0..out.nrows() {
        out[(i, i)] += shift;
    }
    out
}

pub fn trace(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Frobenius inner product `sum_ij a_ij b_ij`.
pub fn frobenius_dot(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_operator_norm(a: MatRef<'_, f64>) -> Result<f64> {
    let eig = sym_eigenvalues(a)?;
    Ok(eig.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn sym_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Degeneracy(format!("symmetric eigensolver failed ({e:?})")))
}

pub fn is_symmetric(a: MatRef<'_, f64>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

pub fn mat_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let xc = Col::from_fn(x.len(), |i| x[i]);
    col_to_vec(&(a * &xc))
}

pub fn col_to_vec(c: &Col<f64>) -> Vec<f64> {
    (0..c.nrows()).map(|i| c[i]).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
