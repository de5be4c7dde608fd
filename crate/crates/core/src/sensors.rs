//! Sensor placement: greedy maximization of the inf-sup constant, its
//! fill-distance variant, and deterministic or random baselines.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::BackgroundBasis;
use crate::error::{check_len, PbdwError, Result};
use crate::hilbert::DiscreteSpace;
use crate::linalg::{embed, extreme, hermitian_eigenvalues};
use crate::models::{Grid, Point, Rectangle};
use crate::observe::{gaussian_functional, Functional};
use crate::scalar::Scalar;

/// Default threshold for switching from SGreedy to fill-distance selection.
pub const DEFAULT_SWITCH_TOL: f64 = 0.4;
/// Default minimum separation of random placements.
pub const DEFAULT_MIN_DISTANCE: f64 = 0.02;
const MAX_REJECTIONS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    Sgreedy,
    SgreedyApprox { tol: f64 },
    Uniform,
    Gauss,
    RandomMinDist { delta: f64 },
}

/// Candidate centers for the greedy algorithms with their Gaussian functionals.
#[derive(Clone, Debug)]
pub struct CandidateDictionary {
    pub centers: Vec<Point>,
    pub width: f64,
    functionals: Vec<Functional>,
}

impl CandidateDictionary {
    pub fn new(grid: &Grid, centers: Vec<Point>, width: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(PbdwError::InvalidArgument("empty candidate dictionary".into()));
        }
        for (i, c) in centers.iter().enumerate() {
            if centers[..i].contains(c) {
                return Err(PbdwError::InvalidArgument(format!("duplicate candidate {c:?}")));
            }
        }
        let functionals = centers
            .iter()
            .map(|&c| gaussian_functional(grid, c, width))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            centers,
            width,
            functionals,
        })
    }

    /// Every `stride`-th grid node in both directions of a structured grid
    /// with `nx + 1` nodes per row.
    pub fn from_grid(grid: &Grid, nx: usize, stride: usize, width: f64) -> Result<Self> {
        let stride = stride.max(1);
        let per_row = nx + 1;
        let centers = grid
            .points
            .iter()
            .enumerate()
            .filter(|(k, _)| (k % per_row) % stride == 0 && (k / per_row) % stride == 0)
            .map(|(_, p)| *p)
            .collect();
        Self::new(grid, centers, width)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }
}

/// Ordered selection with the inf-sup constant `β_{N,m}` after each pick.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensorSelection {
    pub indices: Vec<usize>,
    pub centers: Vec<Point>,
    pub betas: Vec<f64>,
    /// Number of picks made by the greedy phase before switching.
    pub greedy_steps: usize,
}

/// Precomputed `L_dict = ℓ(ζ)` and `K_dict = ℓ(q)` over the dictionary.
struct DictionaryData<T: Scalar> {
    l: DMatrix<T>,
    k: DMatrix<T>,
}

impl<T: Scalar> DictionaryData<T> {
    fn new(space: &DiscreteSpace<T>, background: &BackgroundBasis<T>, dict: &CandidateDictionary) -> Result<Self> {
        check_len("background", space.dim(), background.vectors().nrows())?;
        let mut w = DMatrix::<f64>::zeros(space.dim(), dict.len());
        for (j, f) in dict.functionals.iter().enumerate() {
            check_len("dictionary functional", space.dim(), f.weights.len())?;
            w.set_column(j, &f.weights);
        }
        let w: DMatrix<T> = embed(&w);
        let q = space.solve_gram(&w)?;
        Ok(Self {
            l: w.adjoint() * background.vectors(),
            k: w.adjoint() * q,
        })
    }

    /// `β` of the selected set using the leading `modes` background vectors;
    /// `None` when the selected kernel is not positive definite.
    fn beta(&self, selected: &[usize], modes: usize) -> Option<f64> {
        let k = self.k.select_rows(selected).select_columns(selected);
        let (lo, hi) = extreme(&hermitian_eigenvalues(&k));
        if !(lo > 1e-12 * hi) {
            return None;
        }
        if modes == 0 {
            return Some(1.0);
        }
        let l = self.l.select_rows(selected).columns(0, modes).into_owned();
        let chol = k.cholesky()?;
        let s = l.adjoint() * chol.solve(&l);
        let (lo, _) = extreme(&hermitian_eigenvalues(&s));
        Some(lo.max(0.0).sqrt())
    }
}

fn greedy_step<T: Scalar>(data: &DictionaryData<T>, chosen: &[usize], taken: &[bool], modes: usize) -> Option<(usize, f64)> {
    let scores: Vec<Option<f64>> = (0..taken.len())
        .into_par_iter()
        .map(|c| {
            if taken[c] {
                return None;
            }
            let mut trial = chosen.to_vec();
            trial.push(c);
            data.beta(&trial, modes)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (c, s) in scores.into_iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
    }
    best
}

/// Greedy selection maximizing `β_{N,m}` at each step.
///
/// While fewer than `N` sensors are chosen, `β_{N,m} = 0` for every
/// candidate; those steps maximize `β_{m,m}` of the leading `m` modes instead.
pub fn sgreedy<T: Scalar>(
    space: &DiscreteSpace<T>,
    background: &BackgroundBasis<T>,
    dict: &CandidateDictionary,
    m: usize,
) -> Result<SensorSelection> {
    sgreedy_approx(space, background, dict, m, f64::INFINITY)
}

/// SGreedy until `m ≥ N` and `β ≥ tol`, then farthest-point selection.
pub fn sgreedy_approx<T: Scalar>(
    space: &DiscreteSpace<T>,
    background: &BackgroundBasis<T>,
    dict: &CandidateDictionary,
    m: usize,
    tol: f64,
) -> Result<SensorSelection> {
    let n = background.len();
    if m < n {
        return Err(PbdwError::TooFewMeasurements { m, n });
    }
    if dict.len() < m {
        return Err(PbdwError::Placement(format!(
            "dictionary has {} candidates, {m} requested",
            dict.len()
        )));
    }
    let data = DictionaryData::new(space, background, dict)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut taken = vec![false; dict.len()];
    let mut betas = Vec::with_capacity(m);
    let mut greedy_steps = 0;
    let mut greedy = true;
    while chosen.len() < m {
        let step = chosen.len() + 1;
        let pick = if greedy {
            let modes = step.min(n);
            let (c, _) = greedy_step(&data, &chosen, &taken, modes).ok_or_else(|| {
                PbdwError::Placement("no admissible candidate keeps K positive definite".into())
            })?;
            greedy_steps += 1;
            c
        } else {
            farthest_point(&dict.centers, &chosen, &taken)
        };
        chosen.push(pick);
        taken[pick] = true;
        let beta = if chosen.len() >= n { data.beta(&chosen, n).unwrap_or(0.0) } else { 0.0 };
        betas.push(beta);
        if chosen.len() == n.max(1) && n > 0 && beta <= 0.0 {
            return Err(PbdwError::Placement(
                "inf-sup constant is zero after N picks: the background is invisible to the dictionary".into(),
            ));
        }
        if greedy && chosen.len() >= n && beta >= tol {
            greedy = false;
        }
    }
    Ok(SensorSelection {
        centers: chosen.iter().map(|&i| dict.centers[i]).collect(),
        indices: chosen,
        betas,
        greedy_steps,
    })
}

/// Candidate maximizing the distance to the already chosen centers.
fn farthest_point(candidates: &[Point], chosen: &[usize], taken: &[bool]) -> usize {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (c, p) in candidates.iter().enumerate() {
        if taken[c] {
            continue;
        }
        let d = chosen
            .iter()
            .map(|&s| dist(*p, candidates[s]))
            .fold(f64::INFINITY, f64::min);
        if d > best.1 {
            best = (c, d);
        }
    }
    best.0
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `h_M = max_x min_m ‖x − x_m‖` over the given points.
pub fn fill_distance(centers: &[Point], points: &[Point]) -> f64 {
    if centers.is_empty() {
        return f64::INFINITY;
    }
    points
        .iter()
        .map(|p| centers.iter().map(|c| dist(*p, *c)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn lattice_shape(m: usize) -> (usize, usize) {
    let nx = (m as f64).sqrt().ceil() as usize;
    let ny = m.div_ceil(nx);
    (nx, ny)
}

/// First `m` points (row-major) of the centered `nx × ny` lattice.
pub fn uniform_placement(domain: &Rectangle, m: usize) -> Vec<Point> {
    if m == 0 {
        return Vec::new();
    }
    let (nx, ny) = lattice_shape(m);
    let mut out = Vec::with_capacity(m);
    'outer: for j in 0..ny {
        for i in 0..nx {
            if out.len() == m {
                break 'outer;
            }
            out.push(domain.map_unit((i as f64 + 0.5) / nx as f64, (j as f64 + 0.5) / ny as f64));
        }
    }
    out
}

/// Gauss–Legendre nodes on `[−1, 1]`, ascending.
pub fn gauss_legendre_nodes(n: usize) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, prev) = if n == 0 { (1.0, 0.0) } else if n == 1 { (x, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
    }
    nodes
}

/// Tensorized Gauss–Legendre nodes in the same layout as [`uniform_placement`].
pub fn gauss_placement(domain: &Rectangle, m: usize) -> Vec<Point> {
    if m == 0 {
        return Vec::new();
    }
    let (nx, ny) = lattice_shape(m);
    let gx = gauss_legendre_nodes(nx);
    let gy = gauss_legendre_nodes(ny);
    let mut out = Vec::with_capacity(m);
    'outer: for y in &gy {
        for x in &gx {
            if out.len() == m {
                break 'outer;
            }
            out.push(domain.map_unit(0.5 * (x + 1.0), 0.5 * (y + 1.0)));
        }
    }
    out
}

/// Uniform samples with pairwise distance at least `delta`.
pub fn random_placement(domain: &Rectangle, m: usize, delta: f64, seed: u64) -> Result<Vec<Point>> {
    random_placement_avoiding(domain, m, delta, &[], seed)
}

/// As [`random_placement`], also keeping `delta` away from `existing` points.
pub fn random_placement_avoiding(
    domain: &Rectangle,
    m: usize,
    delta: f64,
    existing: &[Point],
    seed: u64,
) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Point> = Vec::with_capacity(m);
    let mut rejections = 0;
    while out.len() < m {
        let p = [
            rng.random_range(domain.x0..=domain.x1),
            rng.random_range(domain.y0..=domain.y1),
        ];
        if existing.iter().chain(out.iter()).all(|q| dist(p, *q) >= delta) {
            out.push(p);
        } else {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(PbdwError::Placement(format!(
                    "placed only {} of {m} points with separation {delta}",
                    out.len()
                )));
            }
        }
    }
    Ok(out)
}
