//! End-to-end construction of a PBDW operator for a model problem, and its
//! on-disk bundle (`operator.json` plus matrix files).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::{stability_report, LambdaUMethod, StabilityReport};
use crate::background::{coefficient_bounds, pod, BackgroundBasis, BoxConstraints, SnapshotSet};
use crate::bench::{derive_seed, Formulation, ProblemId};
use crate::error::{PbdwError, Result};
use crate::estimator::{PbdwOperator, Xi};
use crate::hilbert::DiscreteSpace;
use crate::io::{load_matrix, save_matrix};
use crate::models::{snapshot_set, ParametricModel, Point, Sampling};
use crate::observe::{build_l, gaussian_functional, riesz_representers, ObservationSet, DEFAULT_WIDTH};
use crate::scalar::Scalar;
use crate::sensors::{
    gauss_placement, random_placement, sgreedy_approx, uniform_placement, CandidateDictionary, Placement,
};

fn default_grid_n() -> usize {
    32
}
fn default_n_train() -> usize {
    200
}
fn default_width() -> f64 {
    DEFAULT_WIDTH
}
fn default_stride() -> usize {
    2
}
fn default_placement() -> Placement {
    Placement::Sgreedy
}
fn default_sampling() -> Sampling {
    Sampling::UniformRandom
}
fn default_formulation() -> Formulation {
    Formulation::Linear
}

/// Configuration of a single operator build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub problem: ProblemId,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_placement")]
    pub placement: Placement,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_stride")]
    pub candidate_stride: usize,
    #[serde(default)]
    pub xi: Option<Xi>,
    /// ξ values reported by the `stability` subcommand; defaults to `[xi]`.
    #[serde(default)]
    pub xi_list: Vec<Xi>,
    #[serde(default = "default_formulation")]
    pub formulation: Formulation,
    #[serde(default)]
    pub box_margin: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BuildConfig {
    pub fn xi(&self) -> Xi {
        self.xi.unwrap_or(Xi::ZERO)
    }

    pub fn xi_values(&self) -> Vec<Xi> {
        if self.xi_list.is_empty() {
            vec![self.xi()]
        } else {
            self.xi_list.clone()
        }
    }
}

/// Everything assembled for one model and configuration.
pub struct Built<T: Scalar> {
    pub space: DiscreteSpace<T>,
    pub snapshots: SnapshotSet<T>,
    pub background: BackgroundBasis<T>,
    pub obs: ObservationSet<T>,
    pub bounds: BoxConstraints,
    pub centers: Vec<Point>,
    /// Per-step `β` of greedy placements.
    pub betas: Option<Vec<f64>>,
    pub operator: PbdwOperator<T>,
}

pub fn snapshots_for<M: ParametricModel>(model: &M, cfg: &BuildConfig) -> Result<SnapshotSet<M::Field>> {
    snapshot_set(model, cfg.n_train, cfg.sampling, derive_seed(cfg.seed, &[1]))
}

/// Snapshots, POD background, sensor placement, representers and operator.
pub fn build<M: ParametricModel>(model: &M, cfg: &BuildConfig) -> Result<Built<M::Field>> {
    if cfg.m < cfg.n {
        return Err(PbdwError::TooFewMeasurements { m: cfg.m, n: cfg.n });
    }
    let space = model.space()?;
    let grid = model.grid();
    let snapshots = snapshots_for(model, cfg)?;
    let background = pod(&space, &snapshots, cfg.n)?;
    let (centers, betas) = match &cfg.placement {
        Placement::Sgreedy | Placement::SgreedyApprox { .. } => {
            let tol = match cfg.placement {
                Placement::SgreedyApprox { tol } => tol,
                _ => f64::INFINITY,
            };
            let dict = CandidateDictionary::from_grid(&grid, cfg.grid_n, cfg.candidate_stride, cfg.width)?;
            let sel = sgreedy_approx(&space, &background, &dict, cfg.m, tol)?;
            (sel.centers, Some(sel.betas))
        }
        Placement::Uniform => (uniform_placement(&grid.domain, cfg.m), None),
        Placement::Gauss => (gauss_placement(&grid.domain, cfg.m), None),
        Placement::RandomMinDist { delta } => (
            random_placement(&grid.domain, cfg.m, *delta, derive_seed(cfg.seed, &[5, cfg.n as u64, cfg.m as u64]))?,
            None,
        ),
    };
    let functionals = centers
        .iter()
        .map(|&c| gaussian_functional(&grid, c, cfg.width))
        .collect::<Result<Vec<_>>>()?;
    let obs = riesz_representers(&space, functionals)?;
    let l = build_l(&obs, &background)?;
    let bounds = coefficient_bounds(&space, &background, &snapshots, cfg.box_margin)?;
    let box_arg = match cfg.formulation {
        Formulation::Linear => None,
        Formulation::Box => Some(bounds.clone()),
    };
    let operator = PbdwOperator::assemble(l, obs.kernel().clone(), cfg.xi(), box_arg)?
        .with_vectors(background.vectors().clone(), obs.representers().vectors().clone())?;
    Ok(Built {
        space,
        snapshots,
        background,
        obs,
        bounds,
        centers,
        betas,
        operator,
    })
}

/// Stability reports over the configured ξ values.
pub fn stability_sweep<T: Scalar>(built: &Built<T>, xis: &[Xi]) -> Result<Vec<StabilityReport>> {
    xis.iter()
        .map(|&xi| stability_report(&built.space, &built.obs, &built.operator.with_xi(xi)?, LambdaUMethod::Subspace))
        .collect()
}

/// Metadata stored next to the operator matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub field: String,
    pub n: usize,
    pub m: usize,
    pub xi: Xi,
    pub formulation: Formulation,
    #[serde(rename = "box")]
    pub bounds: Option<BoxConstraints>,
    #[serde(default)]
    pub centers: Vec<Point>,
    #[serde(default)]
    pub width: Option<f64>,
}

fn field_name<T: Scalar>() -> &'static str {
    if T::IS_COMPLEX {
        "complex"
    } else {
        "real"
    }
}

/// Writes `operator.json`, `L.mat`, `K.mat` and, when present, the
/// background and representer vectors.
pub fn save_operator<T: Scalar>(dir: &Path, op: &PbdwOperator<T>, centers: &[Point], width: Option<f64>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = OperatorMeta {
        field: field_name::<T>().into(),
        n: op.n(),
        m: op.m(),
        xi: op.xi(),
        formulation: if op.is_linear() { Formulation::Linear } else { Formulation::Box },
        bounds: op.bounds().cloned(),
        centers: centers.to_vec(),
        width,
    };
    std::fs::write(dir.join("operator.json"), serde_json::to_string_pretty(&meta)?)?;
    save_matrix(dir.join("L.mat"), op.l())?;
    save_matrix(dir.join("K.mat"), op.k())?;
    if let (Some(z), Some(q)) = (op.background(), op.representers()) {
        save_matrix(dir.join("background.mat"), z)?;
        save_matrix(dir.join("representers.mat"), q)?;
    }
    Ok(())
}

pub fn load_meta(dir: &Path) -> Result<OperatorMeta> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join("operator.json"))?)?)
}

pub fn load_operator<T: Scalar>(dir: &Path) -> Result<PbdwOperator<T>> {
    let meta = load_meta(dir)?;
    if meta.field != field_name::<T>() {
        return Err(PbdwError::Parse(format!(
            "operator field is {}, expected {}",
            meta.field,
            field_name::<T>()
        )));
    }
    let l: DMatrix<T> = load_matrix(dir.join("L.mat"))?;
    let k: DMatrix<T> = load_matrix(dir.join("K.mat"))?;
    let op = PbdwOperator::assemble(l, k, meta.xi, meta.bounds)?;
    let (zp, qp) = (dir.join("background.mat"), dir.join("representers.mat"));
    if zp.exists() && qp.exists() {
        op.with_vectors(load_matrix(zp)?, load_matrix(qp)?)
    } else {
        Ok(op)
    }
}
