//! Dense linear algebra helpers. Matrices are `nalgebra::DMatrix<f64>` at the
//! API boundary; the decompositions themselves run through faer.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn symmetrize(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Eigenvalues of a symmetric matrix in non-decreasing order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    symmetrize(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigenvalue solver: {e:?}")))
}

/// Full symmetric eigendecomposition; eigenvalues ascending, eigenvectors
/// as the matching columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.nrows() == 0 {
        return Ok((vec![], DMatrix::zeros(0, 0)));
    }
    let evd = symmetrize(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigen solver: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((vals, from_faer(evd.U())))
}

/// Singular values, non-increasing.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(vec![]);
    }
    to_faer(m)
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))
}

/// Spectral norm of an arbitrary matrix.
pub fn op_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Orthonormal basis of the null space of `m`, using the cutoff
/// `rel_tol * s_max` on singular values. A matrix with no rows has the
/// whole space as null space.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let svd = to_faer(m)
        .svd()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0] } else { 0.0 };
    let rank = (0..s.nrows()).filter(|&i| s[i] > rel_tol * smax).count();
    let v = svd.V();
    Ok(DMatrix::from_fn(n, n - rank, |i, j| v[(i, rank + j)]))
}

/// Orthonormal basis of the column span of `m` (cutoff relative to the
/// largest singular value).
pub fn column_span(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(DMatrix::zeros(m.nrows(), 0));
    }
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = s[0];
    let rank = (0..s.nrows()).filter(|&i| s[i] > rel_tol * smax).count();
    let u = svd.U();
    Ok(DMatrix::from_fn(m.nrows(), rank, |i, j| u[(i, j)]))
}

pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > rel_tol * smax).count())
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, dropping eigenvalues
/// below `rel_tol * max |eigenvalue|`.
pub fn pinv_sym(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(m)?;
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (j, &l) in vals.iter().enumerate() {
        if l.abs() > rel_tol * top {
            let c = vecs.column(j);
            out += (c * c.transpose()) / l;
        }
    }
    Ok(out)
}

/// Square-root factor `L` with `L Lᵀ = m`, negative eigenvalues clipped at
/// zero and eigenvalues below `clip * λ_max` dropped. Columns of `L` are
/// scaled eigenvectors, so `L` has exactly one column per retained
/// eigenvalue.
pub fn psd_factor(m: &DMatrix<f64>, clip: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(m)?;
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > clip * top).collect();
    Ok(DMatrix::from_fn(m.nrows(), keep.len(), |i, c| {
        vecs[(i, keep[c])] * vals[keep[c]].sqrt()
    }))
}

/// Cholesky-type factorization of a PSD matrix that skips zero pivots.
/// Returns a lower-trapezoidal `n × rank` matrix `L` with `L Lᵀ = m`.
pub fn semidefinite_cholesky(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..n {
        let mut c = m.column(j).into_owned();
        for prev in &cols {
            let f = prev[j];
            c -= prev * f;
        }
        let piv = c[j];
        if piv > tol {
            let s = piv.sqrt();
            for i in 0..j {
                c[i] = 0.0;
            }
            c /= s;
            cols.push(c);
        }
    }
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}
