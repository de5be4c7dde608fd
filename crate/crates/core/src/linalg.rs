//! Small dense helpers shared by the estimator and the stability analysis.

use nalgebra::{DMatrix, DVector};

use crate::error::{PbdwError, Result};
use crate::scalar::Scalar;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted ascending.
pub fn hermitian_eigen<T: Scalar>(m: &DMatrix<T>) -> (DVector<f64>, DMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> DVector<f64> {
    hermitian_eigen(m).0
}

/// `(m + mᴴ) / 2`.
pub fn hermitize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::from_real(0.5);
    (m + m.adjoint()) * half
}

/// Largest singular value; zero for an empty matrix.
pub fn s_max<T: Scalar>(m: &DMatrix<T>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Smallest and largest singular values.
pub fn singular_value_range<T: Scalar>(m: &DMatrix<T>) -> (f64, f64) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0.0, 0.0);
    }
    let sv = m.clone().singular_values();
    let lo = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    let hi = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    (lo, hi)
}

/// Hermitian positive semi-definite square root via eigen-decomposition.
pub fn psd_sqrt<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let (values, vectors) = hermitian_eigen(m);
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| {
        vectors[(i, j)] * T::from_real(values[j].max(0.0).sqrt())
    });
    &scaled * vectors.adjoint()
}

/// Relative asymmetry `‖m − mᴴ‖_F / ‖m‖_F`.
pub fn asymmetry<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// Solve a Hermitian positive definite system, rejecting matrices whose
/// eigenvalue spread exceeds `1 / rel_tol`.
pub fn solve_hpd<T: Scalar>(
    a: &DMatrix<T>,
    rhs: &DMatrix<T>,
    rel_tol: f64,
    what: &str,
) -> Result<DMatrix<T>> {
    let values = hermitian_eigenvalues(a);
    let (lo, hi) = extreme(&values);
    if !(hi > 0.0) || lo < rel_tol * hi {
        return Err(PbdwError::Singular(format!(
            "{what}: eigenvalue range [{lo:.3e}, {hi:.3e}]"
        )));
    }
    let chol = hermitize(a)
        .cholesky()
        .ok_or_else(|| PbdwError::NotPositiveDefinite(what.to_string()))?;
    Ok(chol.solve(rhs))
}

/// Minimum and maximum entries of a sorted or unsorted vector.
pub fn extreme(values: &DVector<f64>) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Embed a real matrix into the scalar field.
pub fn embed<T: Scalar>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_real)
}

/// Real block form `[Re −Im; Im Re]` of a complex matrix.
pub fn real_block<T: Scalar>(m: &DMatrix<T>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            out[(i, j)] = v.re();
            out[(i, j + c)] = -v.im();
            out[(i + r, j)] = v.im();
            out[(i + r, j + c)] = v.re();
        }
    }
    out
}

/// `[Re v; Im v]`.
pub fn stack_parts<T: Scalar>(v: &DVector<T>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re() } else { v[i - n].im() })
}

/// Inverse of [`stack_parts`].
pub fn unstack_parts<T: Scalar>(v: &DVector<f64>) -> DVector<T> {
    let n = v.len() / 2;
    DVector::from_fn(n, |i, _| T::from_parts(v[i], v[i + n]))
}
