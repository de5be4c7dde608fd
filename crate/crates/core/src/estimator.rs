//! The PBDW estimator: weighted background fit plus Tikhonov-regularized update.
//!
//! With `W_ξ = (ξ Id + K)⁻¹`, the background coefficients solve
//! `min_{z ∈ Φ} (Lz − y)ᴴ W_ξ (Lz − y)` and the update coefficients solve
//! `(K + ξ Id) η = y − L ẑ`. The sentinel `ξ = ∞` uses Euclidean weighting
//! and a zero update.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::BoxConstraints;
use crate::error::{check_len, PbdwError, Result};
use crate::linalg::{extreme, hermitian_eigenvalues, hermitize, real_block, stack_parts, unstack_parts};
use crate::qp::{solve_box_qp, QpOptions};
use crate::scalar::Scalar;

/// Relative eigenvalue threshold below which `K` or `Q_ξ` count as singular.
pub const RANK_TOL: f64 = 1e-12;

/// Regularization weight `ξ ∈ [0, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum Xi {
    Finite(f64),
    Infinite,
}

impl Xi {
    pub const ZERO: Xi = Xi::Finite(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(PbdwError::InvalidArgument(format!("xi must be in [0, inf], got {value}")));
        }
        Ok(if value.is_infinite() { Xi::Infinite } else { Xi::Finite(value) })
    }

    pub fn value(self) -> f64 {
        match self {
            Xi::Finite(x) => x,
            Xi::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Xi::Finite(_))
    }
}

impl fmt::Display for Xi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Xi::Finite(x) => write!(f, "{x:e}"),
            Xi::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Xi {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Xi::Finite(x) => s.serialize_f64(*x),
            Xi::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Xi {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Xi::new(x).map_err(serde::de::Error::custom),
            Raw::Text(t) if t == "inf" || t == "infinity" => Ok(Xi::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid xi '{t}'"))),
        }
    }
}

/// 15 log-spaced values in `[1e-6, 1e3]` bracketed by `0` and `∞`.
pub fn default_xi_grid() -> Vec<Xi> {
    let mut grid = vec![Xi::ZERO];
    for i in 0..15 {
        let e = -6.0 + 9.0 * i as f64 / 14.0;
        grid.push(Xi::Finite(10f64.powf(e)));
    }
    grid.push(Xi::Infinite);
    grid
}

/// Assembled PBDW solver state for one `(L, K, ξ, Φ)`.
#[derive(Clone, Debug)]
pub struct PbdwOperator<T: Scalar> {
    l: DMatrix<T>,
    k: DMatrix<T>,
    xi: Xi,
    /// `W_ξ` for finite ξ, the identity for ξ = ∞.
    weight: DMatrix<T>,
    /// `Q_ξ = Lᴴ W L`.
    q: DMatrix<T>,
    q_range: (f64, f64),
    k_range: (f64, f64),
    update_chol: Option<Cholesky<T, Dyn>>,
    bounds: Option<BoxConstraints>,
    background: Option<DMatrix<T>>,
    representers: Option<DMatrix<T>>,
    qp: QpOptions,
}

/// Reconstruction `û = Σ ẑ_n ζ_n + Σ η̂_m q_m`.
#[derive(Clone, Debug)]
pub struct Estimate<T: Scalar> {
    pub z: DVector<T>,
    pub eta: DVector<T>,
    /// Present when the operator carries the background and representer vectors.
    pub state: Option<DVector<T>>,
    /// `y − L ẑ − K η̂`.
    pub residual: DVector<T>,
    /// `J_ξ(ẑ, η̂)`; for ξ = ∞ the background misfit `‖Lẑ − y‖²`.
    pub objective: f64,
    pub qp_iterations: usize,
    /// Projected-gradient residual of the QP (0 for linear solves).
    pub kkt_residual: f64,
}

impl<T: Scalar> PbdwOperator<T> {
    pub fn assemble(l: DMatrix<T>, k: DMatrix<T>, xi: Xi, bounds: Option<BoxConstraints>) -> Result<Self> {
        let (m, n) = l.shape();
        check_len("kernel rows", m, k.nrows())?;
        check_len("kernel columns", m, k.ncols())?;
        if m < n {
            return Err(PbdwError::TooFewMeasurements { m, n });
        }
        if let Xi::Finite(x) = xi {
            Xi::new(x)?;
        }
        let k = hermitize(&k);
        let k_range = extreme(&hermitian_eigenvalues(&k));
        if !(k_range.1 > 0.0) || k_range.0 < RANK_TOL * k_range.1 {
            return Err(PbdwError::Singular(format!(
                "kernel matrix K has eigenvalue range [{:.3e}, {:.3e}]",
                k_range.0, k_range.1
            )));
        }
        if let Some(b) = &bounds {
            let expected = if T::IS_COMPLEX { 2 * n } else { n };
            check_len("box constraints", expected, b.len())?;
        }
        let (weight, update_chol) = match xi {
            Xi::Finite(x) => {
                let shifted = &k + DMatrix::<T>::identity(m, m) * T::from_real(x);
                let chol = shifted
                    .cholesky()
                    .ok_or_else(|| PbdwError::NotPositiveDefinite("K + xi Id".into()))?;
                (hermitize(&chol.inverse()), Some(chol))
            }
            Xi::Infinite => (DMatrix::identity(m, m), None),
        };
        let q = hermitize(&(l.adjoint() * &weight * &l));
        let q_range = if n == 0 { (1.0, 1.0) } else { extreme(&hermitian_eigenvalues(&q)) };
        Ok(Self {
            l,
            k,
            xi,
            weight,
            q,
            q_range,
            k_range,
            update_chol,
            bounds,
            background: None,
            representers: None,
            qp: QpOptions::default(),
        })
    }

    /// Same `(L, K, Φ)` at a different ξ.
    pub fn with_xi(&self, xi: Xi) -> Result<Self> {
        let mut op = Self::assemble(self.l.clone(), self.k.clone(), xi, self.bounds.clone())?;
        op.background = self.background.clone();
        op.representers = self.representers.clone();
        op.qp = self.qp;
        Ok(op)
    }

    /// Same `(L, K, ξ)` with a different box.
    pub fn with_bounds(&self, bounds: Option<BoxConstraints>) -> Result<Self> {
        let mut op = Self::assemble(self.l.clone(), self.k.clone(), self.xi, bounds)?;
        op.background = self.background.clone();
        op.representers = self.representers.clone();
        op.qp = self.qp;
        Ok(op)
    }

    /// Attaches `ζ_n` and `q_m` so that estimates include the state.
    pub fn with_vectors(mut self, background: DMatrix<T>, representers: DMatrix<T>) -> Result<Self> {
        check_len("background vectors", self.n(), background.ncols())?;
        check_len("representer vectors", self.m(), representers.ncols())?;
        check_len("vector lengths", background.nrows(), representers.nrows())?;
        self.background = Some(background);
        self.representers = Some(representers);
        Ok(self)
    }

    pub fn with_qp_options(mut self, qp: QpOptions) -> Self {
        self.qp = qp;
        self
    }

    pub fn l(&self) -> &DMatrix<T> {
        &self.l
    }

    pub fn k(&self) -> &DMatrix<T> {
        &self.k
    }

    pub fn xi(&self) -> Xi {
        self.xi
    }

    /// `W_ξ`, or the identity for ξ = ∞.
    pub fn weight(&self) -> &DMatrix<T> {
        &self.weight
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn q_eigen_range(&self) -> (f64, f64) {
        self.q_range
    }

    pub fn k_eigen_range(&self) -> (f64, f64) {
        self.k_range
    }

    pub fn bounds(&self) -> Option<&BoxConstraints> {
        self.bounds.as_ref()
    }

    pub fn is_linear(&self) -> bool {
        self.bounds.as_ref().is_none_or(|b| b.is_unbounded())
    }

    pub fn m(&self) -> usize {
        self.l.nrows()
    }

    pub fn n(&self) -> usize {
        self.l.ncols()
    }

    pub fn background(&self) -> Option<&DMatrix<T>> {
        self.background.as_ref()
    }

    pub fn representers(&self) -> Option<&DMatrix<T>> {
        self.representers.as_ref()
    }

    fn check_rank(&self) -> Result<()> {
        let (lo, hi) = self.q_range;
        if !(hi > 0.0) || lo < RANK_TOL * hi {
            return Err(PbdwError::Singular(format!(
                "Q = L^H W L is rank deficient (eigenvalue range [{lo:.3e}, {hi:.3e}])"
            )));
        }
        Ok(())
    }

    /// `Lᴴ W y`.
    fn rhs(&self, y: &DVector<T>) -> DVector<T> {
        self.l.adjoint() * (&self.weight * y)
    }

    /// Update coefficients for a given background: `(K + ξ Id) η = y − L z`.
    pub fn update(&self, z: &DVector<T>, y: &DVector<T>) -> Result<DVector<T>> {
        check_len("background coefficients", self.n(), z.len())?;
        check_len("measurements", self.m(), y.len())?;
        let err = y - &self.l * z;
        Ok(match &self.update_chol {
            Some(chol) => chol.solve(&err),
            None => DVector::zeros(self.m()),
        })
    }

    fn finish(&self, z: DVector<T>, y: &DVector<T>, qp_iterations: usize, kkt_residual: f64) -> Result<Estimate<T>> {
        let eta = self.update(&z, y)?;
        let residual = y - &self.l * &z - &self.k * &eta;
        let objective = match self.xi {
            Xi::Finite(_) => self.objective(&z, &eta, y)?,
            Xi::Infinite => (y - &self.l * &z).norm_squared(),
        };
        let state = match (&self.background, &self.representers) {
            (Some(zb), Some(qb)) => Some(zb * &z + qb * &eta),
            _ => None,
        };
        Ok(Estimate {
            z,
            eta,
            state,
            residual,
            objective,
            qp_iterations,
            kkt_residual,
        })
    }

    fn background_solve(&self, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
        if self.n() == 0 {
            return Ok(DMatrix::zeros(0, rhs.ncols()));
        }
        self.check_rank()?;
        let chol = self
            .q
            .clone()
            .cholesky()
            .ok_or_else(|| PbdwError::NotPositiveDefinite("Q = L^H W L".into()))?;
        Ok(chol.solve(rhs))
    }

    /// Linear PBDW: `Q_ξ ẑ = Lᴴ W y`.
    pub fn solve_linear(&self, y: &DVector<T>) -> Result<Estimate<T>> {
        check_len("measurements", self.m(), y.len())?;
        if !self.is_linear() {
            return Err(PbdwError::InvalidArgument(
                "solve_linear called on a box-constrained operator".into(),
            ));
        }
        let z = self.background_solve(&DMatrix::from_column_slice(self.n(), 1, self.rhs(y).as_slice()))?;
        self.finish(z.column(0).into_owned(), y, 0, 0.0)
    }

    /// Matrices `(Z_c, E)` with `ẑ = Z_c y` and `η̂ = E y` for the linear estimator.
    pub fn linear_maps(&self) -> Result<(DMatrix<T>, DMatrix<T>)> {
        if !self.is_linear() {
            return Err(PbdwError::InvalidArgument(
                "the box-constrained estimator is not a linear map".into(),
            ));
        }
        let m = self.m();
        let zc = self.background_solve(&(self.l.adjoint() * &self.weight))?;
        let e = match &self.update_chol {
            Some(chol) => chol.solve(&(DMatrix::identity(m, m) - &self.l * &zc)),
            None => DMatrix::zeros(m, m),
        };
        Ok((zc, e))
    }

    /// Box-constrained PBDW: real problems solve an `N`-dimensional QP,
    /// complex ones the `2N` real block form on `[Re z; Im z]`.
    pub fn solve_box(&self, y: &DVector<T>) -> Result<Estimate<T>> {
        check_len("measurements", self.m(), y.len())?;
        self.check_rank()?;
        let n = self.n();
        let parts = if T::IS_COMPLEX { 2 } else { 1 };
        let unbounded = BoxConstraints::unbounded(parts * n);
        let bounds = self.bounds.as_ref().unwrap_or(&unbounded);
        let rhs = self.rhs(y);
        let (h, f) = if T::IS_COMPLEX {
            (real_block(&self.q), stack_parts(&rhs))
        } else {
            (self.q.map(|v| v.re()), rhs.map(|v| v.re()))
        };
        let sol = solve_box_qp(&h, &f, bounds, self.qp)?;
        let z = if T::IS_COMPLEX {
            unstack_parts(&sol.z)
        } else {
            sol.z.map(T::from_real)
        };
        self.finish(z, y, sol.iterations, sol.residual)
    }

    /// Dispatches on the presence of a bounded box.
    pub fn solve(&self, y: &DVector<T>) -> Result<Estimate<T>> {
        if self.is_linear() {
            self.solve_linear(y)
        } else {
            self.solve_box(y)
        }
    }

    /// `J_ξ(z, η) = ξ ηᴴKη + ‖Lz + Kη − y‖²` for finite ξ.
    pub fn objective(&self, z: &DVector<T>, eta: &DVector<T>, y: &DVector<T>) -> Result<f64> {
        check_len("background coefficients", self.n(), z.len())?;
        check_len("update coefficients", self.m(), eta.len())?;
        check_len("measurements", self.m(), y.len())?;
        let Xi::Finite(xi) = self.xi else {
            return Err(PbdwError::InvalidArgument("objective is defined for finite xi only".into()));
        };
        let k_eta = &self.k * eta;
        let penalty = eta.dotc(&k_eta).real();
        let misfit = (&self.l * z + k_eta - y).norm_squared();
        Ok(xi * penalty + misfit)
    }

    /// `ξ (y − Lz)ᴴ W_ξ (y − Lz)`, the objective minimized over η.
    pub fn reduced_objective(&self, z: &DVector<T>, y: &DVector<T>) -> Result<f64> {
        let Xi::Finite(xi) = self.xi else {
            return Err(PbdwError::InvalidArgument("objective is defined for finite xi only".into()));
        };
        let err = y - &self.l * z;
        Ok(xi * err.dotc(&(&self.weight * &err)).real())
    }
}

/// Complex-valued PBDW; identical to [`PbdwOperator::solve`] on `Complex64`.
pub fn solve_complex(op: &PbdwOperator<Complex64>, y: &DVector<Complex64>) -> Result<Estimate<Complex64>> {
    op.solve(y)
}

/// Holdout functionals evaluated on the background and representer vectors.
#[derive(Clone, Debug)]
pub struct Holdout<T: Scalar> {
    /// `I × N`, entries `ℓ_i^h(ζ_n)`.
    pub on_background: DMatrix<T>,
    /// `I × M`, entries `ℓ_i^h(q_m)`.
    pub on_representers: DMatrix<T>,
    pub values: DVector<T>,
}

impl<T: Scalar> Holdout<T> {
    /// Misfit `‖ℓ^h(û) − y^h‖²` of an estimate.
    pub fn misfit(&self, est: &Estimate<T>) -> f64 {
        (&self.on_background * &est.z + &self.on_representers * &est.eta - &self.values).norm_squared()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct XiSelection {
    pub xi: Xi,
    pub grid: Vec<Xi>,
    pub misfits: Vec<f64>,
}

/// Picks the grid value with the smallest holdout misfit; ties go to the
/// larger ξ.
pub fn select_xi_holdout<T: Scalar>(
    factory: impl Fn(Xi) -> Result<PbdwOperator<T>>,
    y: &DVector<T>,
    holdout: &Holdout<T>,
    grid: &[Xi],
) -> Result<XiSelection> {
    if grid.is_empty() {
        return Err(PbdwError::InvalidArgument("empty xi grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.value().total_cmp(&b.value()));
    let mut misfits = Vec::with_capacity(sorted.len());
    let mut best = (f64::INFINITY, sorted[0]);
    for &xi in &sorted {
        let est = factory(xi)?.solve(y)?;
        let misfit = holdout.misfit(&est);
        if misfit <= best.0 {
            best = (misfit, xi);
        }
        misfits.push(misfit);
    }
    Ok(XiSelection {
        xi: best.1,
        grid: sorted,
        misfits,
    })
}
