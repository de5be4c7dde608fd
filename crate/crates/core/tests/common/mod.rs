//! Random instances and brute-force oracles shared by the integration tests.
//! Oracles use nalgebra directly and never call the solver under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pbdw::background::{BackgroundBasis, BoxConstraints};
use pbdw::hilbert::DiscreteSpace;
use pbdw::observe::{build_l, riesz_representers, Functional, ObservationSet};
use pbdw::Scalar;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut Rng8) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_scalar<T: Scalar>(rng: &mut Rng8) -> T {
    let re = gauss(rng);
    let im = if T::IS_COMPLEX { gauss(rng) } else { 0.0 };
    T::from_parts(re, im)
}

pub fn random_matrix<T: Scalar>(rng: &mut Rng8, r: usize, c: usize) -> DMatrix<T> {
    DMatrix::from_fn(r, c, |_, _| random_scalar(rng))
}

pub fn random_vector<T: Scalar>(rng: &mut Rng8, n: usize) -> DVector<T> {
    DVector::from_fn(n, |_, _| random_scalar(rng))
}

/// A small synthetic problem: ambient space, observations and background.
pub struct Instance<T: Scalar> {
    pub space: DiscreteSpace<T>,
    pub obs: ObservationSet<T>,
    pub background: BackgroundBasis<T>,
    pub l: DMatrix<T>,
    pub k: DMatrix<T>,
}

impl<T: Scalar> Instance<T> {
    pub fn z(&self) -> &DMatrix<T> {
        self.background.vectors()
    }

    pub fn q(&self) -> &DMatrix<T> {
        self.obs.representers().vectors()
    }
}

/// `G = Id + BBᴴ/dim`, Gaussian functional weights, random background.
pub fn random_instance<T: Scalar>(rng: &mut Rng8, dim: usize, n: usize, m: usize) -> Instance<T> {
    let b: DMatrix<T> = random_matrix(rng, dim, dim);
    let gram = DMatrix::<T>::identity(dim, dim) + &b * b.adjoint() * T::from_real(1.0 / dim as f64);
    let space = DiscreteSpace::new(gram).expect("SPD gram");
    let functionals = (0..m)
        .map(|_| Functional::from_weights(DVector::from_fn(dim, |_, _| gauss(rng) / (dim as f64).sqrt())))
        .collect();
    let obs = riesz_representers(&space, functionals).expect("independent functionals");
    let background = BackgroundBasis::from_vectors(&space, &random_matrix(rng, dim, n)).expect("basis");
    let l = build_l(&obs, &background).expect("L");
    let k = obs.kernel().clone();
    Instance {
        space,
        obs,
        background,
        l,
        k,
    }
}

pub fn real_instance(seed: u64, dim: usize, n: usize, m: usize) -> Instance<f64> {
    random_instance(&mut rng(seed), dim, n, m)
}

pub fn complex_instance(seed: u64, dim: usize, n: usize, m: usize) -> Instance<Complex64> {
    random_instance(&mut rng(seed), dim, n, m)
}

/// Random box around zero; with probability `degenerate` a coordinate is frozen.
pub fn random_box(rng: &mut Rng8, n: usize, scale: f64, degenerate: f64) -> BoxConstraints {
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::zeros(n);
    for i in 0..n {
        let c = scale * rng.random_range(-1.0..1.0);
        let w = if rng.random_bool(degenerate) { 0.0 } else { scale * rng.random_range(0.05..1.0) };
        lo[i] = c - w;
        hi[i] = c + w;
    }
    BoxConstraints::new(lo, hi).unwrap()
}

pub fn dense_inverse<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    a.clone().try_inverse().expect("invertible")
}

/// `(K + ξ Id)⁻¹` by dense inversion.
pub fn weight_oracle<T: Scalar>(k: &DMatrix<T>, xi: f64) -> DMatrix<T> {
    let m = k.nrows();
    dense_inverse(&(k + DMatrix::<T>::identity(m, m) * T::from_real(xi)))
}

/// Minimizer of `ξ ηᵀKη + ‖Lz + Kη − y‖²` over `(z, η)` from the joint
/// normal equations (finite ξ > 0).
pub fn dense_joint_minimizer(l: &DMatrix<f64>, k: &DMatrix<f64>, xi: f64, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (m, n) = l.shape();
    let mut a = DMatrix::zeros(m, n + m);
    a.view_mut((0, 0), (m, n)).copy_from(l);
    a.view_mut((0, n), (m, m)).copy_from(k);
    let mut h = a.transpose() * &a;
    let mut pen = h.view_mut((n, n), (m, m));
    pen += k * xi;
    let x = h.lu().solve(&(a.transpose() * y)).expect("nonsingular joint system");
    (x.rows(0, n).into_owned(), x.rows(n, m).into_owned())
}

/// `min_z ‖Lz − y‖²_B` over `ℝᴺ` for an SPD weight `B`.
pub fn weighted_ls_min(l: &DMatrix<f64>, y: &DVector<f64>, b: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let h = l.transpose() * b * l;
    let z = h.lu().solve(&(l.transpose() * b * y)).expect("full rank");
    let r = l * &z - y;
    let v = r.dot(&(b * &r));
    (z, v)
}

/// Same minimum over a box, via [`enumerate_box_qp`].
pub fn weighted_box_min(l: &DMatrix<f64>, y: &DVector<f64>, b: &DMatrix<f64>, bx: &BoxConstraints) -> (DVector<f64>, f64) {
    let h = l.transpose() * b * l;
    let f = l.transpose() * b * y;
    let z = enumerate_box_qp(&h, &f, bx);
    let r = l * &z - y;
    let v = r.dot(&(b * &r));
    (z, v)
}

/// `argmin ½zᵀHz − fᵀz` over a box by trying all `3ᴺ` active patterns and
/// keeping the best primal-feasible stationary point.
pub fn enumerate_box_qp(h: &DMatrix<f64>, f: &DVector<f64>, bx: &BoxConstraints) -> DVector<f64> {
    let n = f.len();
    let total = 3usize.pow(n as u32);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..total {
        let mut pattern = vec![0i8; n];
        let mut c = code;
        for p in pattern.iter_mut() {
            *p = (c % 3) as i8 - 1;
            c /= 3;
        }
        if pattern
            .iter()
            .enumerate()
            .any(|(i, &p)| (p == -1 && !bx.lower[i].is_finite()) || (p == 1 && !bx.upper[i].is_finite()))
        {
            continue;
        }
        let mut z = DVector::zeros(n);
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
        for i in 0..n {
            match pattern[i] {
                -1 => z[i] = bx.lower[i],
                1 => z[i] = bx.upper[i],
                _ => {}
            }
        }
        if !free.is_empty() {
            let hz = h * &z;
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| f[i] - hz[i]));
            let hff = h.select_rows(&free).select_columns(&free);
            let Some(sol) = hff.lu().solve(&rhs) else { continue };
            for (j, &i) in free.iter().enumerate() {
                z[i] = sol[j];
            }
        }
        if !bx.contains(&z, 1e-12) {
            continue;
        }
        let obj = 0.5 * z.dot(&(h * &z)) - f.dot(&z);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, z));
        }
    }
    best.expect("some feasible pattern").1
}

/// Hermitian normal equations `LᴴWL z = LᴴW y` by dense LU.
pub fn hermitian_solve(l: &DMatrix<Complex64>, w: &DMatrix<Complex64>, y: &DVector<Complex64>) -> DVector<Complex64> {
    let h = l.adjoint() * w * l;
    h.lu().solve(&(l.adjoint() * w * y)).expect("nonsingular")
}

/// Largest singular value by power iteration on `AᴴA`.
pub fn power_smax<T: Scalar>(a: &DMatrix<T>, iters: usize) -> f64 {
    let ata = a.adjoint() * a;
    let mut v = DVector::<T>::from_element(a.ncols(), T::from_real(1.0));
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = &ata * &v;
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        lambda = nrm / v.norm();
        v = w / T::from_real(nrm);
    }
    lambda.sqrt()
}

/// Orthonormal basis of `span(vectors)` in the G inner product by modified
/// Gram–Schmidt, run twice.
pub fn gram_schmidt(g: &DMatrix<f64>, vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in 0..vectors.ncols() {
        let mut v = vectors.column(j).into_owned();
        for _ in 0..2 {
            for u in &out {
                let c = u.dot(&(g * &v));
                v -= u * c;
            }
        }
        let nrm = v.dot(&(g * &v)).sqrt();
        out.push(v / nrm);
    }
    DMatrix::from_columns(&out)
}

/// `inf_{z ∈ Z} ‖Π_U z‖ / ‖z‖` estimated from random directions followed by
/// a shrinking random local search; the projection uses an explicit
/// G-orthonormal basis of `U_M`, independent of `L` and `K`.
pub fn brute_force_beta(inst: &Instance<f64>, samples: usize, rng: &mut Rng8) -> f64 {
    let g = inst.space.gram();
    let u = gram_schmidt(g, inst.q());
    let z = inst.z();
    let n = z.ncols();
    let ratio = |c: &DVector<f64>| -> f64 {
        let v = z * c;
        let p = u.transpose() * (g * &v);
        p.norm() / v.dot(&(g * &v)).sqrt()
    };
    let mut best = DVector::from_fn(n, |_, _| gauss(rng));
    let mut best_val = ratio(&best);
    for _ in 0..samples {
        let c = DVector::from_fn(n, |_, _| gauss(rng));
        let r = ratio(&c);
        if r < best_val {
            best_val = r;
            best = c;
        }
    }
    let mut step = 0.1;
    for _ in 0..samples {
        let c = best.normalize() + DVector::from_fn(n, |_, _| step * gauss(rng));
        let r = ratio(&c);
        if r < best_val {
            best_val = r;
            best = c;
        } else {
            step = (step * 0.995).max(1e-6);
        }
    }
    best_val
}

pub fn g_norm<T: Scalar>(space: &DiscreteSpace<T>, v: &DVector<T>) -> f64 {
    space.norm(v).unwrap()
}

pub fn rel_diff<T: Scalar>(a: &DVector<T>, b: &DVector<T>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
