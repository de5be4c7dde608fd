//! The discrete ambient space: a finite-dimensional Hilbert space whose inner
//! product is encoded by an SPD Gram matrix `G`, so that `(u, v) = uᴴ G v`.
//!
//! Every other module computes in this space. The Cholesky factor of `G` is
//! built once at construction and reused for every `G⁻¹` application.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, PbdwError, Result};
use crate::linalg::asymmetry;
use crate::scalar::Scalar;

const SYMMETRY_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-10;

/// Finite-dimensional Hilbert space with SPD Gram matrix.
#[derive(Clone, Debug)]
pub struct DiscreteSpace<T: Scalar> {
    gram: DMatrix<T>,
    chol: Cholesky<T, Dyn>,
    mass: Option<DMatrix<T>>,
}

impl<T: Scalar> DiscreteSpace<T> {
    /// Builds the space from its Gram matrix, checking symmetry and definiteness.
    pub fn new(gram: DMatrix<T>) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() == 0 {
            return Err(PbdwError::InvalidArgument(format!(
                "Gram matrix must be square and non-empty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let asym = asymmetry(&gram);
        if asym > SYMMETRY_TOL {
            return Err(PbdwError::NotPositiveDefinite(format!(
                "Gram matrix asymmetry {asym:.3e}"
            )));
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| PbdwError::NotPositiveDefinite("Cholesky of Gram matrix failed".into()))?;
        Ok(Self {
            gram,
            chol,
            mass: None,
        })
    }

    /// Euclidean space of the given dimension (`G = Id`).
    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    /// Attaches the L² mass matrix used for error reporting.
    pub fn with_mass(mut self, mass: DMatrix<T>) -> Result<Self> {
        check_len("mass matrix", self.dim(), mass.nrows())?;
        check_len("mass matrix", self.dim(), mass.ncols())?;
        self.mass = Some(mass);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<T> {
        &self.gram
    }

    pub fn mass(&self) -> Option<&DMatrix<T>> {
        self.mass.as_ref()
    }

    /// Lower-triangular Cholesky factor `C` with `G = C Cᴴ`.
    pub fn cholesky_factor(&self) -> DMatrix<T> {
        self.chol.l()
    }

    /// `(u, v) = uᴴ G v`.
    pub fn inner(&self, u: &DVector<T>, v: &DVector<T>) -> Result<T> {
        check_len("inner product (left)", self.dim(), u.len())?;
        check_len("inner product (right)", self.dim(), v.len())?;
        Ok(u.dotc(&(&self.gram * v)))
    }

    pub fn norm(&self, u: &DVector<T>) -> Result<f64> {
        Ok(self.inner(u, u)?.real().max(0.0).sqrt())
    }

    /// L² norm through the attached mass matrix.
    pub fn l2_norm(&self, u: &DVector<T>) -> Result<f64> {
        let mass = self
            .mass
            .as_ref()
            .ok_or_else(|| PbdwError::InvalidArgument("space has no mass matrix".into()))?;
        check_len("L2 norm", self.dim(), u.len())?;
        Ok(u.dotc(&(mass * u)).real().max(0.0).sqrt())
    }

    /// `G x`.
    pub fn apply_gram(&self, x: &DMatrix<T>) -> DMatrix<T> {
        &self.gram * x
    }

    /// `G⁻¹ x` through the cached factorization.
    pub fn solve_gram(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        check_len("Gram solve", self.dim(), x.nrows())?;
        Ok(self.chol.solve(x))
    }

    /// Gram matrix `Vᴴ G W` of two families of vectors.
    pub fn cross_gram(&self, v: &DMatrix<T>, w: &DMatrix<T>) -> DMatrix<T> {
        v.adjoint() * (&self.gram * w)
    }
}

/// A family of column vectors in the ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis<T: Scalar> {
    vectors: DMatrix<T>,
    orthonormal: bool,
}

impl<T: Scalar> Basis<T> {
    /// Wraps arbitrary columns; not flagged orthonormal.
    pub fn new(vectors: DMatrix<T>) -> Self {
        Self {
            vectors,
            orthonormal: false,
        }
    }

    /// Flags the columns as G-orthonormal after verifying it to 1e-10.
    pub fn orthonormal(space: &DiscreteSpace<T>, vectors: DMatrix<T>) -> Result<Self> {
        check_len("basis vectors", space.dim(), vectors.nrows())?;
        let gram = space.cross_gram(&vectors, &vectors);
        let k = vectors.ncols();
        let dev = (gram - DMatrix::<T>::identity(k, k)).camax();
        if dev > ORTHONORMAL_TOL {
            return Err(PbdwError::InvalidArgument(format!(
                "columns deviate from orthonormality by {dev:.3e}"
            )));
        }
        Ok(Self {
            vectors,
            orthonormal: true,
        })
    }

    pub fn vectors(&self) -> &DMatrix<T> {
        &self.vectors
    }

    pub fn into_vectors(self) -> DMatrix<T> {
        self.vectors
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Leading `n` columns, keeping the orthonormality flag.
    pub fn truncate(&self, n: usize) -> Basis<T> {
        Basis {
            vectors: self.vectors.columns(0, n.min(self.len())).into_owned(),
            orthonormal: self.orthonormal,
        }
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
///
/// Rejects a column whose G-norm after projection falls below `1e-12` times
/// its original norm.
pub fn orthonormalize<T: Scalar>(space: &DiscreteSpace<T>, vectors: &DMatrix<T>) -> Result<Basis<T>> {
    check_len("orthonormalize", space.dim(), vectors.nrows())?;
    let k = vectors.ncols();
    let mut q = DMatrix::<T>::zeros(space.dim(), k);
    let mut gq = DMatrix::<T>::zeros(space.dim(), k);
    for j in 0..k {
        let mut v = vectors.column(j).into_owned();
        let original = space.norm(&v)?;
        if original == 0.0 {
            return Err(PbdwError::RankDeficient { index: j });
        }
        for _pass in 0..2 {
            for i in 0..j {
                let coeff = gq.column(i).dotc(&v);
                v.axpy(-coeff, &q.column(i), T::one());
            }
        }
        let gv = space.gram() * &v;
        let nv = v.dotc(&gv).real().max(0.0).sqrt();
        if nv < RANK_TOL * original {
            return Err(PbdwError::RankDeficient { index: j });
        }
        let scale = T::from_real(1.0 / nv);
        q.set_column(j, &(v * scale));
        gq.set_column(j, &(gv * scale));
    }
    Ok(Basis {
        vectors: q,
        orthonormal: true,
    })
}

/// G-orthonormal basis of the span of `vectors`, dropping numerically
/// dependent directions.
///
/// Column-pivoted Gram–Schmidt with reorthogonalization: at each step the
/// remaining column with the largest residual norm is taken, and the process
/// stops once that norm falls below `rel_tol` times the largest input norm.
pub fn orthonormal_span<T: Scalar>(
    space: &DiscreteSpace<T>,
    vectors: &DMatrix<T>,
    rel_tol: f64,
) -> Result<Basis<T>> {
    check_len("orthonormal span", space.dim(), vectors.nrows())?;
    let k = vectors.ncols();
    let mut residual = vectors.clone();
    let mut g_residual = space.gram() * vectors;
    let mut norms: Vec<f64> = (0..k)
        .map(|j| residual.column(j).dotc(&g_residual.column(j)).real().max(0.0))
        .collect();
    let scale = norms.iter().cloned().fold(0.0_f64, f64::max).sqrt();
    let mut used = vec![false; k];
    let mut columns: Vec<DVector<T>> = Vec::new();
    let mut g_columns: Vec<DVector<T>> = Vec::new();
    if scale == 0.0 {
        return Ok(Basis {
            vectors: DMatrix::zeros(space.dim(), 0),
            orthonormal: true,
        });
    }
    loop {
        let pick = (0..k)
            .filter(|&j| !used[j])
            .max_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(b.cmp(&a)));
        let Some(j) = pick else { break };
        if norms[j].sqrt() <= rel_tol * scale {
            break;
        }
        used[j] = true;
        let mut v = residual.column(j).into_owned();
        for (q, gq) in columns.iter().zip(&g_columns) {
            let c = gq.dotc(&v);
            v.axpy(-c, q, T::one());
        }
        let gv = space.gram() * &v;
        let nv = v.dotc(&gv).real().max(0.0).sqrt();
        if nv <= rel_tol * scale {
            continue;
        }
        let inv = T::from_real(1.0 / nv);
        let q = v * inv;
        let gq = gv * inv;
        for c in 0..k {
            if used[c] {
                continue;
            }
            let coeff = gq.dotc(&residual.column(c));
            residual.column_mut(c).axpy(-coeff, &q, T::one());
            g_residual.column_mut(c).axpy(-coeff, &gq, T::one());
            norms[c] = residual
                .column(c)
                .dotc(&g_residual.column(c))
                .real()
                .max(0.0);
        }
        columns.push(q);
        g_columns.push(gq);
    }
    let mut out = DMatrix::zeros(space.dim(), columns.len());
    for (j, c) in columns.iter().enumerate() {
        out.set_column(j, c);
    }
    Ok(Basis {
        vectors: out,
        orthonormal: true,
    })
}

/// Coefficients `(ψ_q, u)` of `u` against every basis vector.
pub fn coefficients<T: Scalar>(space: &DiscreteSpace<T>, basis: &Basis<T>, u: &DVector<T>) -> Result<DVector<T>> {
    check_len("coefficients", space.dim(), u.len())?;
    check_len("coefficients (basis)", space.dim(), basis.ambient_dim())?;
    Ok(basis.vectors.adjoint() * (space.gram() * u))
}

/// Orthogonal projection `Π_Q u = Σ (ψ_q, u) ψ_q` onto an orthonormal basis.
pub fn project<T: Scalar>(space: &DiscreteSpace<T>, basis: &Basis<T>, u: &DVector<T>) -> Result<DVector<T>> {
    if !basis.orthonormal {
        return Err(PbdwError::NotOrthonormal);
    }
    let c = coefficients(space, basis, u)?;
    Ok(&basis.vectors * c)
}
