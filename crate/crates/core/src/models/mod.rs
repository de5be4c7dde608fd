//! Best-knowledge parametric models and synthetic truths.

pub mod adr;
pub mod banded;
pub mod helmholtz;
pub mod mesh;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adr::AdvectionDiffusion;
pub use helmholtz::Helmholtz;
pub use mesh::{Grid, Point, Rectangle, StructuredMesh};

use crate::background::SnapshotSet;
use crate::error::{PbdwError, Result};
use crate::hilbert::DiscreteSpace;
use crate::linalg::embed;
use crate::scalar::Scalar;

/// Box of admissible parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(PbdwError::InvalidArgument(
                "parameter bounds must be non-empty and of equal length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a <= b)) {
            return Err(PbdwError::InvalidArgument("parameter box is empty".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(m, (a, b))| *m >= *a && *m <= *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| if a == b { *a } else { rng.random_range(*a..=*b) })
            .collect()
    }

    /// First `n` points of a tensor lattice with `⌈n^{1/P}⌉` points per axis.
    pub fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let p = self.dim();
        let mut per_axis = (n as f64).powf(1.0 / p as f64).round().max(1.0) as usize;
        while per_axis.pow(p as u32) < n {
            per_axis += 1;
        }
        (0..n)
            .map(|mut k| {
                (0..p)
                    .map(|d| {
                        let idx = k % per_axis;
                        k /= per_axis;
                        let t = if per_axis == 1 {
                            0.5
                        } else {
                            idx as f64 / (per_axis - 1) as f64
                        };
                        self.lower[d] + t * (self.upper[d] - self.lower[d])
                    })
                    .collect()
            })
            .collect()
    }
}

/// One discrete solve of a model.
#[derive(Clone, Debug)]
pub struct FieldSolution<T: Scalar> {
    pub state: DVector<T>,
    pub mu: Vec<f64>,
    pub biased: bool,
    /// Relative residual `‖A u − f‖ / ‖f‖` of the discrete system.
    pub residual: f64,
}

/// A parametrized PDE discretized on a structured mesh.
pub trait ParametricModel: Sync {
    type Field: Scalar;

    fn parameter_domain(&self) -> &ParameterDomain;

    fn mesh(&self) -> &StructuredMesh;

    /// Solves at `mu`; `biased` switches on the non-parametric model error.
    fn solve(&self, mu: &[f64], biased: bool) -> Result<FieldSolution<Self::Field>>;

    /// H¹ ambient space on the model mesh, with the L² mass attached.
    fn space(&self) -> Result<DiscreteSpace<Self::Field>> {
        let mesh = self.mesh();
        DiscreteSpace::new(embed(&mesh.h1_gram()))?.with_mass(embed(&mesh.mass()))
    }

    fn grid(&self) -> Grid {
        self.mesh().grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    UniformRandom,
    Lattice,
}

/// Parameters for `n` draws, deterministic in `seed`.
pub fn sample_parameters(domain: &ParameterDomain, n: usize, sampling: Sampling, seed: u64) -> Vec<Vec<f64>> {
    match sampling {
        Sampling::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| domain.sample(&mut rng)).collect()
        }
        Sampling::Lattice => domain.lattice(n),
    }
}

/// Unbiased best-knowledge snapshots over the parameter domain.
pub fn snapshot_set<M: ParametricModel>(
    model: &M,
    n_train: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<SnapshotSet<M::Field>> {
    if n_train == 0 {
        return Err(PbdwError::InvalidArgument("n_train must be positive".into()));
    }
    let parameters = sample_parameters(model.parameter_domain(), n_train, sampling, seed);
    snapshots_at(model, parameters)
}

/// Unbiased snapshots at the given parameters.
pub fn snapshots_at<M: ParametricModel>(model: &M, parameters: Vec<Vec<f64>>) -> Result<SnapshotSet<M::Field>> {
    let states: Vec<DVector<M::Field>> = parameters
        .par_iter()
        .map(|mu| model.solve(mu, false).map(|s| s.state))
        .collect::<Result<_>>()?;
    let dim = model.mesh().num_nodes();
    let mut fields = DMatrix::zeros(dim, states.len());
    for (j, s) in states.iter().enumerate() {
        fields.set_column(j, s);
    }
    SnapshotSet::new(fields, parameters)
}

/// Synthetic truth: the biased (or unbiased) solve at `mu_true`.
pub fn true_field<M: ParametricModel>(model: &M, mu_true: &[f64], biased: bool) -> Result<FieldSolution<M::Field>> {
    model.solve(mu_true, biased)
}
