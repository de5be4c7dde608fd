//! Stability constants of linear recovery algorithms, error bounds, the
//! inf-sup constant and the nonlinear stability constant.
//!
//! A linear algorithm `A: 𝕂ᴹ → U` is stored as the `𝒩 × M` matrix whose
//! columns are `A(e_m)`. Its image is given a G-orthonormal basis `ψ`, and
//! the reduced matrices are `A = ψᴴ G A_mat` and `A_ℓ = A · ℓ(ψ)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::BoxConstraints;
use crate::error::{check_len, PbdwError, Result};
use crate::estimator::{PbdwOperator, Xi};
use crate::hilbert::{orthonormal_span, Basis, DiscreteSpace};
use crate::linalg::{extreme, hermitian_eigen, hermitian_eigenvalues, real_block, s_max};
use crate::observe::ObservationSet;
use crate::scalar::Scalar;

/// Relative tolerance for truncating dependent directions of an image.
pub const SPAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaUMethod {
    /// Exact reduction to `Im(A) + U_M`; the operator is the identity on the complement.
    #[default]
    Subspace,
    /// Singular values of the full `𝒩 × 𝒩` operator in the G-norm.
    Dense,
    /// Matrix-free Lanczos on `(Id − A_ℓ)*(Id − A_ℓ)` with full reorthogonalization.
    Arnoldi,
}

#[derive(Clone, Debug)]
pub struct AlgorithmMatrix<T: Scalar> {
    map: DMatrix<T>,
    functionals: DMatrix<T>,
    representers: DMatrix<T>,
    image: Basis<T>,
    a: DMatrix<T>,
    a_ell: DMatrix<T>,
}

impl<T: Scalar> AlgorithmMatrix<T> {
    pub fn from_map(space: &DiscreteSpace<T>, obs: &ObservationSet<T>, map: DMatrix<T>) -> Result<Self> {
        check_len("algorithm map rows", space.dim(), map.nrows())?;
        check_len("algorithm map columns", obs.len(), map.ncols())?;
        let image = orthonormal_span(space, &map, SPAN_TOL)?;
        let psi = image.vectors();
        let a = psi.adjoint() * space.apply_gram(&map);
        let ell_psi = obs.weights().adjoint() * psi;
        let a_ell = &a * ell_psi;
        Ok(Self {
            map,
            functionals: obs.weights().clone(),
            representers: obs.representers().vectors().clone(),
            image,
            a,
            a_ell,
        })
    }

    /// The linear PBDW algorithm of an operator carrying its background vectors.
    pub fn from_operator(space: &DiscreteSpace<T>, obs: &ObservationSet<T>, op: &PbdwOperator<T>) -> Result<Self> {
        let (zc, e) = op.linear_maps()?;
        let zb = op.background().ok_or_else(|| {
            PbdwError::InvalidArgument("operator has no background vectors attached".into())
        })?;
        let map = zb * zc + obs.representers().vectors() * e;
        Self::from_map(space, obs, map)
    }

    /// Background part `Π_Z A^{pbdw}` of the linear PBDW algorithm.
    pub fn background_part(space: &DiscreteSpace<T>, obs: &ObservationSet<T>, op: &PbdwOperator<T>) -> Result<Self> {
        let (zc, _) = op.linear_maps()?;
        let zb = op
            .background()
            .ok_or_else(|| PbdwError::InvalidArgument("operator has no background vectors attached".into()))?;
        Self::from_map(space, obs, zb * zc)
    }

    /// Ridge regression `y ↦ Σ ((ξ Id + K)⁻¹ y)_m q_m`.
    pub fn ridge(space: &DiscreteSpace<T>, obs: &ObservationSet<T>, xi: Xi) -> Result<Self> {
        let op = PbdwOperator::assemble(DMatrix::zeros(obs.len(), 0), obs.kernel().clone(), xi, None)?;
        let (_, e) = op.linear_maps()?;
        Self::from_map(space, obs, obs.representers().vectors() * e)
    }

    pub fn map(&self) -> &DMatrix<T> {
        &self.map
    }

    pub fn image(&self) -> &Basis<T> {
        &self.image
    }

    pub fn image_dim(&self) -> usize {
        self.image.len()
    }

    /// Reduced `Q × M` matrix `A`.
    pub fn reduced(&self) -> &DMatrix<T> {
        &self.a
    }

    /// Reduced `Q × Q` matrix `A_ℓ`.
    pub fn reduced_ell(&self) -> &DMatrix<T> {
        &self.a_ell
    }

    /// `‖(Id − ψψᴴG) A_mat‖_F / ‖A_mat‖_F`: how well ψ spans the image.
    pub fn image_residual(&self, space: &DiscreteSpace<T>) -> f64 {
        let psi = self.image.vectors();
        let r = &self.map - psi * (psi.adjoint() * space.apply_gram(&self.map));
        let scale = self.map.norm();
        if scale == 0.0 { 0.0 } else { r.norm() / scale }
    }

    /// `Λ₂ = s_max(A)`.
    pub fn lambda_2(&self) -> f64 {
        s_max(&self.a)
    }

    /// `Λ₂` from the full map, `s_max(Cᴴ A_mat)` with `G = C Cᴴ`.
    pub fn lambda_2_full(&self, space: &DiscreteSpace<T>) -> f64 {
        s_max(&(space.cholesky_factor().adjoint() * &self.map))
    }

    /// `Λ_U^bias = s_max(Id − A_ℓ)`.
    pub fn lambda_bias(&self) -> f64 {
        let q = self.a_ell.nrows();
        s_max(&(DMatrix::identity(q, q) - &self.a_ell))
    }

    /// `σ²`-coefficient of the mean-square bound, `trace(AᴴA)`.
    pub fn trace_term(&self) -> f64 {
        self.a.norm_squared()
    }

    /// `‖A_ℓ² − A_ℓ‖₂`.
    pub fn idempotence_defect(&self) -> f64 {
        s_max(&(&self.a_ell * &self.a_ell - &self.a_ell))
    }

    /// Applies `Id − A_ℓ` to a state.
    pub fn apply_residual_operator(&self, v: &DVector<T>) -> DVector<T> {
        v - &self.map * (self.functionals.adjoint() * v)
    }

    /// `Λ_U = ‖Id − A_ℓ‖_{L(U,U)}` over the discrete space.
    pub fn lambda_u(&self, space: &DiscreteSpace<T>, method: LambdaUMethod) -> Result<f64> {
        match method {
            LambdaUMethod::Subspace => Ok(self.lambda_u_subspace(space)),
            LambdaUMethod::Dense => Ok(self.lambda_u_dense(space)),
            LambdaUMethod::Arnoldi => self.lambda_u_lanczos(space, 1e-6, 300),
        }
    }

    fn lambda_u_subspace(&self, space: &DiscreteSpace<T>) -> f64 {
        let dim = space.dim();
        let mut stacked = DMatrix::zeros(dim, self.image.len() + self.representers.ncols());
        stacked.columns_mut(0, self.image.len()).copy_from(self.image.vectors());
        stacked
            .columns_mut(self.image.len(), self.representers.ncols())
            .copy_from(&self.representers);
        let phi = match orthonormal_span(space, &stacked, SPAN_TOL) {
            Ok(b) => b.into_vectors(),
            Err(_) => return self.lambda_u_dense(space),
        };
        let d = phi.ncols();
        let t = DMatrix::identity(d, d)
            - (phi.adjoint() * space.apply_gram(&self.map)) * (self.functionals.adjoint() * &phi);
        let restricted = s_max(&t);
        if d < dim { restricted.max(1.0) } else { restricted }
    }

    fn lambda_u_dense(&self, space: &DiscreteSpace<T>) -> f64 {
        let dim = space.dim();
        let c = space.cholesky_factor();
        let c_inv_h = c
            .adjoint()
            .solve_upper_triangular(&DMatrix::identity(dim, dim))
            .expect("Cholesky factor is nonsingular");
        let t = DMatrix::<T>::identity(dim, dim) - &self.map * self.functionals.adjoint();
        s_max(&(c.adjoint() * t * c_inv_h))
    }

    /// Lanczos in the G-inner product for the largest eigenvalue of `T*T`,
    /// where `T* = Id − G⁻¹ ℓᴴ A_matᴴ G` is the G-adjoint.
    pub fn lambda_u_lanczos(&self, space: &DiscreteSpace<T>, tol: f64, max_iter: usize) -> Result<f64> {
        let dim = space.dim();
        let apply = |v: &DVector<T>| -> DVector<T> {
            let tv = self.apply_residual_operator(v);
            let gtv = space.gram() * &tv;
            &tv - &self.representers * (self.map.adjoint() * gtv)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x1a2b);
        let mut v = DVector::from_fn(dim, |_, _| T::from_parts(rng.random_range(-1.0..1.0), 0.0));
        v /= T::from_real(space.norm(&v)?);
        let mut basis: Vec<DVector<T>> = Vec::new();
        let mut g_basis: Vec<DVector<T>> = Vec::new();
        let mut images: Vec<DVector<T>> = Vec::new();
        let limit = max_iter.min(dim);
        let mut last = (0.0, f64::INFINITY);
        for k in 0..limit {
            let gv = space.gram() * &v;
            let bv = apply(&v);
            basis.push(v.clone());
            g_basis.push(gv);
            images.push(bv.clone());
            // Rayleigh–Ritz on the current Krylov basis.
            let h = DMatrix::from_fn(k + 1, k + 1, |i, j| g_basis[i].dotc(&images[j]));
            let (vals, vecs) = hermitian_eigen(&h);
            let theta = vals[k].max(0.0);
            let s = vecs.column(k);
            let mut w = bv;
            for _ in 0..2 {
                for (q, gq) in basis.iter().zip(&g_basis) {
                    let c = gq.dotc(&w);
                    w.axpy(-c, q, T::one());
                }
            }
            let beta = space.norm(&w)?;
            let ritz_residual = beta * s[k].modulus();
            last = (theta, ritz_residual);
            if ritz_residual <= tol * theta.max(f64::MIN_POSITIVE) || beta <= 1e-14 * theta.max(1.0) {
                return Ok(theta.sqrt());
            }
            v = w / T::from_real(beta);
        }
        if basis.len() == dim {
            return Ok(last.0.sqrt());
        }
        Err(PbdwError::NotConverged {
            solver: "Lanczos (Lambda_U)",
            iterations: limit,
            residual: last.1,
        })
    }
}

/// `β_{N,M} = sqrt(λ_min(Lᴴ K⁻¹ L))` for a G-orthonormal background basis.
pub fn inf_sup_beta<T: Scalar>(l: &DMatrix<T>, k: &DMatrix<T>) -> Result<f64> {
    check_len("kernel", l.nrows(), k.nrows())?;
    if l.ncols() == 0 {
        return Ok(1.0);
    }
    let chol = k
        .clone()
        .cholesky()
        .ok_or_else(|| PbdwError::NotPositiveDefinite("kernel matrix K".into()))?;
    let s = l.adjoint() * chol.solve(l);
    let (lo, _) = extreme(&hermitian_eigenvalues(&s));
    Ok(lo.max(0.0).sqrt())
}

/// `Λ^nl = 1 / λ_min(Q)` restricted to coordinates with `a_n < b_n`; zero when
/// the box is a single point.
pub fn lambda_nl(q: &DMatrix<f64>, bounds: Option<&BoxConstraints>) -> Result<f64> {
    let n = q.nrows();
    let free: Vec<usize> = match bounds {
        Some(b) => {
            check_len("box constraints", n, b.len())?;
            b.free_indices()
        }
        None => (0..n).collect(),
    };
    if free.is_empty() {
        return Ok(0.0);
    }
    let restricted = q.select_rows(&free).select_columns(&free);
    let (lo, _) = extreme(&hermitian_eigenvalues(&restricted));
    if !(lo > 0.0) {
        return Err(PbdwError::Singular(format!("restricted Q has eigenvalue {lo:.3e}")));
    }
    Ok(1.0 / lo)
}

/// Real form of `Q_ξ` matching the layout of the operator's box.
pub fn real_q<T: Scalar>(op: &PbdwOperator<T>) -> DMatrix<f64> {
    if T::IS_COMPLEX {
        real_block(op.q())
    } else {
        op.q().map(|v| v.re())
    }
}

/// `Λ^nl` of an operator for its own box (or `ℝᴺ`).
pub fn lambda_nl_of<T: Scalar>(op: &PbdwOperator<T>) -> Result<f64> {
    lambda_nl(&real_q(op), op.bounds())
}

/// `‖Lᴴ W_ξ‖₂`, the data-to-gradient factor in the nonlinear stability bound.
pub fn data_sensitivity<T: Scalar>(op: &PbdwOperator<T>) -> f64 {
    s_max(&(op.l().adjoint() * op.weight()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub m: usize,
    pub xi: Xi,
    pub lambda2: f64,
    pub lambda_u: f64,
    pub lambda_bias: f64,
    pub beta: f64,
    pub lambda_nl: f64,
    pub trace_term: f64,
    pub image_dim: usize,
}

/// All constants of the linear PBDW algorithm of `op`.
pub fn stability_report<T: Scalar>(
    space: &DiscreteSpace<T>,
    obs: &ObservationSet<T>,
    op: &PbdwOperator<T>,
    method: LambdaUMethod,
) -> Result<StabilityReport> {
    let linear = op.with_bounds(None)?;
    let am = AlgorithmMatrix::from_operator(space, obs, &linear)?;
    Ok(StabilityReport {
        n: op.n(),
        m: op.m(),
        xi: op.xi(),
        lambda2: am.lambda_2(),
        lambda_u: am.lambda_u(space, method)?,
        lambda_bias: am.lambda_bias(),
        beta: inf_sup_beta(op.l(), op.k())?,
        lambda_nl: lambda_nl_of(op)?,
        trace_term: am.trace_term(),
        image_dim: am.image_dim(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorBound {
    /// `Λ₂‖y − ℓ(u)‖ + Λ_U‖Π⊥u‖ + Λ^bias‖u‖`; absent without the truth.
    pub worst_case: Option<f64>,
    /// `(Λ_U‖Π⊥u‖ + Λ^bias‖u‖)² + σ² trace(AᴴA)`, or only the noise term.
    pub mean_square: f64,
    /// Set when only the noise contribution could be evaluated.
    pub partial: bool,
}

/// A priori error bounds; `sigma2` is `E|ε_m|²` (summed over real and
/// imaginary parts for complex noise).
pub fn error_bound<T: Scalar>(
    space: &DiscreteSpace<T>,
    obs: &ObservationSet<T>,
    am: &AlgorithmMatrix<T>,
    report: &StabilityReport,
    y: &DVector<T>,
    u_true: Option<&DVector<T>>,
    sigma2: f64,
) -> Result<ErrorBound> {
    check_len("measurements", obs.len(), y.len())?;
    let noise = sigma2 * report.trace_term;
    let Some(u) = u_true else {
        return Ok(ErrorBound {
            worst_case: None,
            mean_square: noise,
            partial: true,
        });
    };
    check_len("true state", space.dim(), u.len())?;
    let psi = am.image().vectors();
    let perp = u - psi * (psi.adjoint() * (space.gram() * u));
    let model = report.lambda_u * space.norm(&perp)? + report.lambda_bias * space.norm(u)?;
    let data = (y - obs.evaluate(u)?).norm();
    Ok(ErrorBound {
        worst_case: Some(report.lambda2 * data + model),
        mean_square: model * model + noise,
        partial: false,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussMarkovReport {
    pub trials: usize,
    pub lambda2_reference: f64,
    pub lambda_u_reference: f64,
    /// `min_D Λ₂(Z(R_∞ + D)) − Λ₂(A^{pbdw,∞})`.
    pub min_gap_lambda2: f64,
    /// `min_E Λ_U(Z(R_0 + E)) − Λ_U(Π_Z A^{pbdw,0})`.
    pub min_gap_lambda_u: f64,
}

/// Samples competitors `z_A = (R + D) y` with `D L = 0` around the ξ = ∞ and
/// ξ = 0 background maps and records the smallest constant gaps.
pub fn gauss_markov_check<T: Scalar>(
    space: &DiscreteSpace<T>,
    obs: &ObservationSet<T>,
    background: &DMatrix<T>,
    trials: usize,
    seed: u64,
) -> Result<GaussMarkovReport> {
    let l = obs.evaluate_columns(background)?;
    let (m, n) = l.shape();
    let inf = PbdwOperator::assemble(l.clone(), obs.kernel().clone(), Xi::Infinite, None)?;
    let zero = PbdwOperator::assemble(l.clone(), obs.kernel().clone(), Xi::ZERO, None)?;
    let (r_inf, _) = inf.linear_maps()?;
    let (r_zero, _) = zero.linear_maps()?;
    let reference_2 = AlgorithmMatrix::from_map(space, obs, background * &r_inf)?.lambda_2();
    let reference_u = AlgorithmMatrix::from_map(space, obs, background * &r_zero)?.lambda_u(space, LambdaUMethod::Subspace)?;
    // Projectors whose row space annihilates L: I − L R.
    let null_inf = DMatrix::<T>::identity(m, m) - &l * &r_inf;
    let null_zero = DMatrix::<T>::identity(m, m) - &l * &r_zero;
    let gaps: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let scale = if t == 0 { 0.0 } else { 10f64.powf(rng.random_range(-2.0..0.5)) };
            let mut draw = || {
                DMatrix::from_fn(n, m, |_, _| {
                    let im = if T::IS_COMPLEX { rng.random_range(-1.0..1.0) } else { 0.0 };
                    T::from_parts(rng.random_range(-1.0..1.0), im) * T::from_real(scale)
                })
            };
            let d = draw() * &null_inf;
            let e = draw() * &null_zero;
            let l2 = AlgorithmMatrix::from_map(space, obs, background * (&r_inf + d))?.lambda_2();
            let lu = AlgorithmMatrix::from_map(space, obs, background * (&r_zero + e))?
                .lambda_u(space, LambdaUMethod::Subspace)?;
            Ok((l2 - reference_2, lu - reference_u))
        })
        .collect::<Result<_>>()?;
    Ok(GaussMarkovReport {
        trials,
        lambda2_reference: reference_2,
        lambda_u_reference: reference_u,
        min_gap_lambda2: gaps.iter().map(|g| g.0).fold(f64::INFINITY, f64::min),
        min_gap_lambda_u: gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::{riesz_representers, Functional};
    use nalgebra::dmatrix;

    fn canonical(dim: usize, m: usize) -> (DiscreteSpace<f64>, ObservationSet<f64>) {
        let space = DiscreteSpace::euclidean(dim).unwrap();
        let obs = riesz_representers(&space, (0..m).map(|i| Functional::nodal(dim, i)).collect()).unwrap();
        (space, obs)
    }

    #[test]
    fn orthonormal_injection_has_unit_lambda_2() {
        let (space, obs) = canonical(4, 2);
        let am = AlgorithmMatrix::from_map(&space, &obs, DMatrix::identity(4, 2)).unwrap();
        assert!((am.lambda_2() - 1.0).abs() < 1e-14);
        assert!((am.lambda_2_full(&space) - 1.0).abs() < 1e-14);
        assert!(am.lambda_bias() < 1e-14);
    }

    #[test]
    fn ridge_unit_kernel() {
        let (space, obs) = canonical(5, 3);
        let am = AlgorithmMatrix::ridge(&space, &obs, Xi::Finite(1.0)).unwrap();
        assert!((am.lambda_2() - 0.5).abs() < 1e-12);
        assert!((am.lambda_u(&space, LambdaUMethod::Subspace).unwrap() - 1.0).abs() < 1e-12);
        assert!((am.lambda_bias() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pbdw_limits_and_interpolation_instance() {
        let (space, obs) = canonical(2, 2);
        for xi in [Xi::ZERO, Xi::Infinite] {
            let op = PbdwOperator::assemble(dmatrix![1.0; 0.0], obs.kernel().clone(), xi, None)
                .unwrap()
                .with_vectors(dmatrix![1.0; 0.0], obs.representers().vectors().clone())
                .unwrap();
            let am = AlgorithmMatrix::from_operator(&space, &obs, &op).unwrap();
            assert!(am.lambda_bias() < 1e-12);
            assert_eq!(am.image_dim(), if xi == Xi::ZERO { 2 } else { 1 });
        }
    }

    #[test]
    fn lambda_u_methods_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dim = 14;
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let space = DiscreteSpace::new(&a * a.transpose() + DMatrix::identity(dim, dim) * 2.0).unwrap();
        let fs = (0..5)
            .map(|_| Functional::from_weights(DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))))
            .collect();
        let obs = riesz_representers(&space, fs).unwrap();
        let zb = crate::hilbert::orthonormalize(&space, &DMatrix::from_fn(dim, 2, |_, _| rng.random_range(-1.0..1.0)))
            .unwrap()
            .into_vectors();
        let l = obs.evaluate_columns(&zb).unwrap();
        for xi in [Xi::ZERO, Xi::Finite(0.3), Xi::Infinite] {
            let op = PbdwOperator::assemble(l.clone(), obs.kernel().clone(), xi, None)
                .unwrap()
                .with_vectors(zb.clone(), obs.representers().vectors().clone())
                .unwrap();
            let am = AlgorithmMatrix::from_operator(&space, &obs, &op).unwrap();
            let sub = am.lambda_u(&space, LambdaUMethod::Subspace).unwrap();
            let dense = am.lambda_u(&space, LambdaUMethod::Dense).unwrap();
            let lanczos = am.lambda_u(&space, LambdaUMethod::Arnoldi).unwrap();
            assert!((sub - dense).abs() <= 1e-8 * dense, "{sub} vs {dense}");
            assert!((lanczos - dense).abs() <= 1e-5 * dense, "{lanczos} vs {dense}");
            assert!(am.image_residual(&space) < 1e-10);
            assert!((am.lambda_2() - am.lambda_2_full(&space)).abs() <= 1e-8 * am.lambda_2());
        }
    }

    #[test]
    fn lambda_nl_examples() {
        let q = dmatrix![2.0, 0.0; 0.0, 5.0];
        assert!((lambda_nl(&q, None).unwrap() - 0.5).abs() < 1e-15);
        let frozen = BoxConstraints::new(DVector::from_vec(vec![1.0, -1.0]), DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert!((lambda_nl(&q, Some(&frozen)).unwrap() - 0.2).abs() < 1e-15);
        let point = BoxConstraints::new(DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(lambda_nl(&q, Some(&point)).unwrap(), 0.0);
    }

    #[test]
    fn beta_examples() {
        // Z = span{e₁} ⊂ U_M = span{e₁, e₂}.
        let (_, obs) = canonical(3, 2);
        assert!((inf_sup_beta(&dmatrix![1.0; 0.0], obs.kernel()).unwrap() - 1.0).abs() < 1e-14);
        // Z = span{e₃} ⟂ U_M.
        assert_eq!(inf_sup_beta(&dmatrix![0.0; 0.0], obs.kernel()).unwrap(), 0.0);
    }

    #[test]
    fn error_bound_without_truth_is_partial() {
        let (space, obs) = canonical(3, 2);
        let am = AlgorithmMatrix::ridge(&space, &obs, Xi::Finite(1.0)).unwrap();
        let report = StabilityReport {
            n: 0,
            m: 2,
            xi: Xi::Finite(1.0),
            lambda2: am.lambda_2(),
            lambda_u: 1.0,
            lambda_bias: am.lambda_bias(),
            beta: 1.0,
            lambda_nl: 0.0,
            trace_term: am.trace_term(),
            image_dim: am.image_dim(),
        };
        let b = error_bound(&space, &obs, &am, &report, &DVector::zeros(2), None, 0.04).unwrap();
        assert!(b.partial && b.worst_case.is_none());
        assert!((b.mean_square - 0.04 * 0.5).abs() < 1e-14);
    }
}
