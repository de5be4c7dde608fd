//! Box-constrained convex quadratic programs
//! `min ½ zᵀHz − fᵀz` subject to `a ≤ z ≤ b`, with `H` symmetric positive definite.

use nalgebra::{DMatrix, DVector};

use crate::background::BoxConstraints;
use crate::error::{check_len, PbdwError, Result};
use crate::linalg::{extreme, hermitian_eigenvalues};

#[derive(Clone, Copy, Debug)]
pub struct QpOptions {
    /// Stop when `‖z − P(z − ∇/λ_max)‖ ≤ tol (1 + ‖z‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Attempt an active-set Newton step every this many iterations.
    pub polish_every: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            polish_every: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub iterations: usize,
    /// Scaled projected-gradient residual at `z`.
    pub residual: f64,
    /// `−1` at the lower bound, `+1` at the upper, `0` free.
    pub active: Vec<i8>,
}

pub fn objective(h: &DMatrix<f64>, f: &DVector<f64>, z: &DVector<f64>) -> f64 {
    0.5 * z.dot(&(h * z)) - f.dot(z)
}

fn projected_residual(z: &DVector<f64>, g: &DVector<f64>, lip: f64, bx: &BoxConstraints) -> f64 {
    let mut step = z - g / lip;
    bx.project(&mut step);
    (z - step).norm()
}

fn active_pattern(z: &DVector<f64>, g: &DVector<f64>, bx: &BoxConstraints) -> Vec<i8> {
    (0..z.len())
        .map(|i| {
            if bx.lower[i] == bx.upper[i] {
                -1
            } else if z[i] <= bx.lower[i] && g[i] >= 0.0 {
                -1
            } else if z[i] >= bx.upper[i] && g[i] <= 0.0 {
                1
            } else {
                0
            }
        })
        .collect()
}

/// Solves the equality-constrained subproblem with the active coordinates
/// pinned to their bounds. Returns `None` if the reduced matrix is not SPD.
pub fn solve_with_active(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    bx: &BoxConstraints,
    active: &[i8],
) -> Option<DVector<f64>> {
    let n = f.len();
    let mut z = DVector::zeros(n);
    let free: Vec<usize> = (0..n).filter(|&i| active[i] == 0).collect();
    for i in 0..n {
        match active[i] {
            -1 => z[i] = bx.lower[i],
            1 => z[i] = bx.upper[i],
            _ => {}
        }
    }
    if free.is_empty() {
        return Some(z);
    }
    let hz = h * &z;
    let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| f[i] - hz[i]));
    let hff = h.select_rows(&free).select_columns(&free);
    let sol = hff.cholesky()?.solve(&rhs);
    for (k, &i) in free.iter().enumerate() {
        z[i] = sol[k];
    }
    Some(z)
}

/// Projected accelerated gradient (FISTA with adaptive restart) using the
/// exact Lipschitz constant `λ_max(H)`, interleaved with active-set polishing.
pub fn solve_box_qp(h: &DMatrix<f64>, f: &DVector<f64>, bx: &BoxConstraints, opts: QpOptions) -> Result<QpSolution> {
    let n = f.len();
    check_len("QP Hessian", n, h.nrows())?;
    check_len("QP Hessian", n, h.ncols())?;
    check_len("QP box", n, bx.len())?;
    if n == 0 {
        return Ok(QpSolution {
            z: DVector::zeros(0),
            iterations: 0,
            residual: 0.0,
            active: Vec::new(),
        });
    }
    let (lo, lip) = extreme(&hermitian_eigenvalues(h));
    if !(lo > 0.0) {
        return Err(PbdwError::NotPositiveDefinite(format!(
            "QP Hessian has eigenvalue {lo:.3e}"
        )));
    }
    let grad = |z: &DVector<f64>| h * z - f;
    let converged = |z: &DVector<f64>, r: f64| r <= opts.tol * (1.0 + z.norm());

    // Warm start: clipped unconstrained minimizer.
    let mut z = h.clone().cholesky().map(|c| c.solve(f)).unwrap_or_else(|| DVector::zeros(n));
    bx.project(&mut z);
    let mut g = grad(&z);
    let mut residual = projected_residual(&z, &g, lip, bx);
    let mut y = z.clone();
    let mut t = 1.0_f64;
    let mut iterations = 0;
    let mut best_obj = objective(h, f, &z);

    while !converged(&z, residual) {
        if iterations >= opts.max_iter {
            return Err(PbdwError::NotConverged {
                solver: "box QP",
                iterations,
                residual,
            });
        }
        iterations += 1;
        let gy = grad(&y);
        let mut z_next = &y - gy / lip;
        bx.project(&mut z_next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // Adaptive restart when momentum points uphill.
        let restart = (&y - &z_next).dot(&(&z_next - &z)) > 0.0;
        if restart {
            y = z_next.clone();
            t = 1.0;
        } else {
            y = &z_next + (&z_next - &z) * ((t - 1.0) / t_next);
            t = t_next;
        }
        z = z_next;
        g = grad(&z);
        residual = projected_residual(&z, &g, lip, bx);

        if iterations % opts.polish_every == 0 && !converged(&z, residual) {
            let pattern = active_pattern(&z, &g, bx);
            if let Some(mut cand) = solve_with_active(h, f, bx, &pattern) {
                bx.project(&mut cand);
                let obj = objective(h, f, &cand);
                if obj <= objective(h, f, &z) {
                    z = cand;
                    g = grad(&z);
                    residual = projected_residual(&z, &g, lip, bx);
                    y = z.clone();
                    t = 1.0;
                }
            }
        }
        best_obj = best_obj.min(objective(h, f, &z));
    }
    log::trace!("box QP converged in {iterations} iterations, objective {best_obj:.6e}");
    let active = active_pattern(&z, &g, bx);
    Ok(QpSolution {
        z,
        iterations,
        residual,
        active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(lo: &[f64], hi: &[f64]) -> BoxConstraints {
        BoxConstraints::new(DVector::from_column_slice(lo), DVector::from_column_slice(hi)).unwrap()
    }

    #[test]
    fn one_dimensional_clip() {
        let s = solve_box_qp(&dmatrix![1.0], &DVector::from_element(1, 2.0), &bx(&[0.0], &[1.0]), QpOptions::default())
            .unwrap();
        assert_eq!(s.z[0], 1.0);
        assert_eq!(s.active, vec![1]);
    }

    #[test]
    fn inactive_box_returns_unconstrained_minimizer() {
        let h = dmatrix![2.0, 0.5; 0.5, 1.0];
        let f = DVector::from_vec(vec![1.0, -1.0]);
        let s = solve_box_qp(&h, &f, &bx(&[-10.0, -10.0], &[10.0, 10.0]), QpOptions::default()).unwrap();
        let exact = h.clone().cholesky().unwrap().solve(&f);
        assert!((s.z - exact).norm() < 1e-12);
    }

    #[test]
    fn ill_conditioned_instance_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = a.qr().q();
        let d = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 10f64.powi(-(i as i32) * 2)));
        let h = &q * d * q.transpose();
        let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let b = bx(&[-0.1; 6], &[0.1; 6]);
        let s = solve_box_qp(&h, &f, &b, QpOptions::default()).unwrap();
        assert!(b.contains(&s.z, 0.0));
        assert!(s.residual <= 1e-10 * (1.0 + s.z.norm()));
    }

    #[test]
    fn degenerate_box_freezes_coordinates() {
        let h = dmatrix![2.0, 0.0; 0.0, 5.0];
        let f = DVector::from_vec(vec![1.0, 1.0]);
        let s = solve_box_qp(&h, &f, &bx(&[0.3, -1.0], &[0.3, 1.0]), QpOptions::default()).unwrap();
        assert_eq!(s.z[0], 0.3);
        assert!((s.z[1] - 0.2).abs() < 1e-12);
    }
}
