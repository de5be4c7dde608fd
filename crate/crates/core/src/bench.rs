//! Experiment harness: the average relative L² error, sweeps over `N`, SNR
//! and ξ, and paired linear versus box-constrained comparisons.
//!
//! CSV columns, in order:
//! `problem,n,m,holdout,snr,biased,placement,xi,formulation,e_avg,e_std,
//! lambda2,lambda_u,lambda_bias,beta,lambda_nl,noise_checksum,status`.
//! Timings live only in the JSON sidecar so that the CSV is reproducible.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{stability_report, LambdaUMethod, StabilityReport};
use crate::background::{coefficient_bounds, pod, BackgroundBasis, BoxConstraints, SnapshotSet};
use crate::error::{check_len, PbdwError, Result};
use crate::estimator::{default_xi_grid, select_xi_holdout, Holdout, PbdwOperator, Xi};
use crate::hilbert::DiscreteSpace;
use crate::models::{
    sample_parameters, snapshot_set, AdvectionDiffusion, Grid, Helmholtz, ParametricModel, Point, Sampling,
};
use crate::observe::{
    build_l, draw_noise, gaussian_functional, probe_values, riesz_representers, NoiseLevel, ObservationSet, Snr,
    DEFAULT_PROBES, DEFAULT_WIDTH,
};
use crate::scalar::Scalar;
use crate::sensors::{
    gauss_placement, random_placement, random_placement_avoiding, sgreedy_approx, uniform_placement,
    CandidateDictionary, Placement,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    AdvectionDiffusion,
    Helmholtz,
}

impl ProblemId {
    pub fn label(self) -> &'static str {
        match self {
            ProblemId::AdvectionDiffusion => "advection_diffusion",
            ProblemId::Helmholtz => "helmholtz",
        }
    }
}

/// Number of measurements as a function of `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MRule {
    /// `M = N + k`.
    Offset(usize),
    /// `M` fixed for every `N`.
    Fixed(usize),
}

impl MRule {
    pub fn m(self, n: usize) -> usize {
        match self {
            MRule::Offset(k) => n + k,
            MRule::Fixed(m) => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiPolicy {
    /// One row per listed value.
    Fixed(Vec<Xi>),
    /// Per-trial holdout selection over the grid.
    Holdout(Vec<Xi>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Linear,
    Box,
}

impl Formulation {
    pub fn label(self) -> &'static str {
        match self {
            Formulation::Linear => "linear",
            Formulation::Box => "box",
        }
    }
}

fn default_grid_n() -> usize {
    32
}
fn default_n_train() -> usize {
    200
}
fn default_repetitions() -> usize {
    50
}
fn default_n_test() -> usize {
    10
}
fn default_width() -> f64 {
    DEFAULT_WIDTH
}
fn default_stride() -> usize {
    2
}
fn default_xi() -> XiPolicy {
    XiPolicy::Holdout(default_xi_grid())
}
fn default_formulations() -> Vec<Formulation> {
    vec![Formulation::Linear]
}
fn default_m_rule() -> MRule {
    MRule::Offset(3)
}
fn default_snr() -> Vec<Snr> {
    vec![Snr::NOISELESS]
}
fn default_placement() -> Placement {
    Placement::Sgreedy
}
fn default_sampling() -> Sampling {
    Sampling::UniformRandom
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
    pub n_list: Vec<usize>,
    #[serde(default = "default_m_rule")]
    pub m_rule: MRule,
    #[serde(default = "default_snr")]
    pub snr_list: Vec<Snr>,
    #[serde(default)]
    pub biased: bool,
    #[serde(default = "default_placement")]
    pub placement: Placement,
    /// Noise repetitions `K` per test parameter.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_xi")]
    pub xi: XiPolicy,
    #[serde(default = "default_formulations")]
    pub formulations: Vec<Formulation>,
    #[serde(default = "default_width")]
    pub width: f64,
    /// Subsampling of grid nodes for the greedy candidate dictionary.
    #[serde(default = "default_stride")]
    pub candidate_stride: usize,
    /// Relative widening of the snapshot coefficient box.
    #[serde(default)]
    pub box_margin: f64,
    /// Skip the stability constants of each row.
    #[serde(default)]
    pub skip_stability: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemId, n_list: Vec<usize>) -> Self {
        Self {
            problem,
            grid_n: default_grid_n(),
            n_train: default_n_train(),
            sampling: default_sampling(),
            n_list,
            m_rule: default_m_rule(),
            snr_list: default_snr(),
            biased: false,
            placement: default_placement(),
            repetitions: default_repetitions(),
            n_test: default_n_test(),
            xi: default_xi(),
            formulations: default_formulations(),
            width: default_width(),
            candidate_stride: default_stride(),
            box_margin: 0.0,
            skip_stability: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PbdwError::InvalidArgument(msg));
        if self.grid_n < 2 {
            return bad("grid_n must be at least 2".into());
        }
        if self.n_list.is_empty() || self.snr_list.is_empty() || self.formulations.is_empty() {
            return bad("n_list, snr_list and formulations must be non-empty".into());
        }
        if self.repetitions == 0 || self.n_test == 0 || self.n_train == 0 {
            return bad("repetitions, n_test and n_train must be positive".into());
        }
        for &n in &self.n_list {
            let m = self.m_rule.m(n);
            if m < n || m == 0 {
                return Err(PbdwError::TooFewMeasurements { m, n });
            }
            if n > self.n_train {
                return Err(PbdwError::ExceedsRank {
                    requested: n,
                    max: self.n_train,
                });
            }
        }
        if self.snr_list.iter().any(|s| !(s.0 > 0.0)) {
            return bad("SNR values must be positive".into());
        }
        let grid = match &self.xi {
            XiPolicy::Fixed(g) | XiPolicy::Holdout(g) => g,
        };
        if grid.is_empty() {
            return bad("empty xi list".into());
        }
        if !(self.width > 0.0) || !(self.box_margin >= 0.0) {
            return bad("width must be positive and box_margin non-negative".into());
        }
        Ok(())
    }
}

/// One sweep cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: ProblemId,
    pub n: usize,
    pub m: usize,
    pub holdout: usize,
    pub snr: Snr,
    pub biased: bool,
    pub placement: String,
    /// The fixed ξ, or `holdout`.
    pub xi: String,
    pub formulation: Formulation,
    pub e_avg: f64,
    /// Relative L² errors ordered by (test parameter, repetition).
    pub errors: Vec<f64>,
    /// ξ chosen per trial under holdout selection.
    pub selected_xi: Vec<Xi>,
    /// Constants at the fixed ξ, or at the most frequently selected one.
    pub stability: Option<StabilityReport>,
    /// Order-weighted sum of every noise entry drawn for this row.
    pub noise_checksum: f64,
    pub elapsed_ms: f64,
    pub error: Option<String>,
}

/// `‖û − u‖_{L²} / ‖u‖_{L²}` through the space's mass matrix.
pub fn relative_l2_error<T: Scalar>(space: &DiscreteSpace<T>, estimate: &DVector<T>, truth: &DVector<T>) -> Result<f64> {
    let t = space.l2_norm(truth)?;
    if !(t > 0.0) {
        return Err(PbdwError::InvalidArgument("zero-norm truth".into()));
    }
    Ok(space.l2_norm(&(estimate - truth))? / t)
}

/// Average relative L² error; `estimates[j][k]` is repetition `k` for truth `j`.
pub fn e_avg<T: Scalar>(space: &DiscreteSpace<T>, estimates: &[Vec<DVector<T>>], truths: &[DVector<T>]) -> Result<f64> {
    check_len("estimates per truth", truths.len(), estimates.len())?;
    let mut errors = Vec::new();
    for (row, truth) in estimates.iter().zip(truths) {
        for est in row {
            errors.push(relative_l2_error(space, est, truth)?);
        }
    }
    if errors.is_empty() {
        return Err(PbdwError::InvalidArgument("no estimates".into()));
    }
    Ok(mean(&errors))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Deterministic child seed for a labelled stream.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in path {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

const STREAM_SNAPSHOTS: u64 = 1;
const STREAM_TESTS: u64 = 2;
const STREAM_PROBES: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_PLACEMENT: u64 = 5;

struct TestCase<T: Scalar> {
    truth: DVector<T>,
    probes: Vec<T>,
}

/// Model-independent state shared by every row of a sweep.
struct Prepared<T: Scalar> {
    space: DiscreteSpace<T>,
    grid: Grid,
    grid_n: usize,
    snapshots: SnapshotSet<T>,
    background: BackgroundBasis<T>,
    tests: Vec<TestCase<T>>,
}

fn prepare<M: ParametricModel>(model: &M, cfg: &ExperimentConfig) -> Result<Prepared<M::Field>> {
    let space = model.space()?;
    let grid = model.grid();
    let snapshots = snapshot_set(model, cfg.n_train, cfg.sampling, derive_seed(cfg.seed, &[STREAM_SNAPSHOTS]))?;
    let n_max = *cfg.n_list.iter().max().unwrap_or(&0);
    let background = pod(&space, &snapshots, n_max)?;
    let params = sample_parameters(
        model.parameter_domain(),
        cfg.n_test,
        Sampling::UniformRandom,
        derive_seed(cfg.seed, &[STREAM_TESTS]),
    );
    let tests = params
        .par_iter()
        .enumerate()
        .map(|(j, mu)| {
            let truth = model.solve(mu, cfg.biased)?.state;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_PROBES, j as u64]));
            let probes = probe_values(&grid, &truth, cfg.width, DEFAULT_PROBES, &mut rng)?;
            Ok(TestCase { truth, probes })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        space,
        grid,
        grid_n: cfg.grid_n,
        snapshots,
        background,
        tests,
    })
}

/// Training and holdout centers; holdout uses the same strategy, continuing
/// the greedy sequence or drawing a separate deterministic/random set.
fn place_sensors<T: Scalar>(
    prep: &Prepared<T>,
    basis: &BackgroundBasis<T>,
    cfg: &ExperimentConfig,
    m: usize,
    holdout: usize,
) -> Result<(Vec<Point>, Vec<Point>)> {
    let domain = &prep.grid.domain;
    let greedy = |tol: f64| -> Result<(Vec<Point>, Vec<Point>)> {
        let dict = CandidateDictionary::from_grid(&prep.grid, prep.grid_n, cfg.candidate_stride, cfg.width)?;
        let mut centers = sgreedy_approx(&prep.space, basis, &dict, m + holdout, tol)?.centers;
        let rest = centers.split_off(m);
        Ok((centers, rest))
    };
    match &cfg.placement {
        Placement::Sgreedy => greedy(f64::INFINITY),
        Placement::SgreedyApprox { tol } => greedy(*tol),
        Placement::Uniform => Ok((uniform_placement(domain, m), uniform_placement(domain, holdout))),
        Placement::Gauss => Ok((gauss_placement(domain, m), gauss_placement(domain, holdout))),
        Placement::RandomMinDist { delta } => {
            let seed = derive_seed(cfg.seed, &[STREAM_PLACEMENT, basis.len() as u64, m as u64]);
            let train = random_placement(domain, m, *delta, seed)?;
            let rest = random_placement_avoiding(domain, holdout, *delta, &train, seed.wrapping_add(1))?;
            Ok((train, rest))
        }
    }
}

pub fn placement_label(p: &Placement) -> String {
    match p {
        Placement::Sgreedy => "sgreedy".into(),
        Placement::SgreedyApprox { tol } => format!("sgreedy_approx({tol})"),
        Placement::Uniform => "uniform".into(),
        Placement::Gauss => "gauss".into(),
        Placement::RandomMinDist { delta } => format!("random_min_dist({delta})"),
    }
}

/// Everything that depends on `N` but not on SNR, ξ or the formulation.
struct Stage<T: Scalar> {
    n: usize,
    m: usize,
    obs: ObservationSet<T>,
    l: DMatrix<T>,
    background: DMatrix<T>,
    bounds: BoxConstraints,
    holdout_obs: Option<(DMatrix<T>, DMatrix<T>, DMatrix<T>)>,
}

fn functionals_at(grid: &Grid, centers: &[Point], width: f64) -> Result<Vec<crate::observe::Functional>> {
    centers.iter().map(|&c| gaussian_functional(grid, c, width)).collect()
}

fn build_stage<T: Scalar>(prep: &Prepared<T>, cfg: &ExperimentConfig, n: usize) -> Result<Stage<T>> {
    let m = cfg.m_rule.m(n);
    let holdout = match cfg.xi {
        XiPolicy::Holdout(_) => (m / 2).max(1),
        XiPolicy::Fixed(_) => 0,
    };
    let basis = prep.background.truncate(n);
    let (train, rest) = place_sensors(prep, &basis, cfg, m, holdout)?;
    let obs = riesz_representers(&prep.space, functionals_at(&prep.grid, &train, cfg.width)?)?;
    let l = build_l(&obs, &basis)?;
    let bounds = coefficient_bounds(&prep.space, &basis, &prep.snapshots, cfg.box_margin)?;
    let holdout_obs = if holdout > 0 {
        let fs = functionals_at(&prep.grid, &rest, cfg.width)?;
        let mut w = DMatrix::<f64>::zeros(prep.space.dim(), fs.len());
        for (i, f) in fs.iter().enumerate() {
            w.set_column(i, &f.weights);
        }
        let w: DMatrix<T> = crate::linalg::embed(&w);
        Some((
            w.adjoint() * basis.vectors(),
            w.adjoint() * obs.representers().vectors(),
            w,
        ))
    } else {
        None
    };
    Ok(Stage {
        n,
        m,
        background: basis.vectors().clone(),
        obs,
        l,
        bounds,
        holdout_obs,
    })
}

fn operator<T: Scalar>(stage: &Stage<T>, xi: Xi, formulation: Formulation) -> Result<PbdwOperator<T>> {
    let bounds = match formulation {
        Formulation::Linear => None,
        Formulation::Box => Some(stage.bounds.clone()),
    };
    PbdwOperator::assemble(stage.l.clone(), stage.obs.kernel().clone(), xi, bounds)?
        .with_vectors(stage.background.clone(), stage.obs.representers().vectors().clone())
}

fn checksum<T: Scalar>(noise: &DVector<T>) -> f64 {
    noise
        .iter()
        .enumerate()
        .map(|(i, v)| (i + 1) as f64 * (v.re() + v.im()))
        .sum()
}

struct Cell {
    snr: Snr,
    xi: Option<Xi>,
    formulation: Formulation,
}

fn evaluate_cell<T: Scalar>(prep: &Prepared<T>, cfg: &ExperimentConfig, stage: &Stage<T>, cell: &Cell) -> Result<ResultRow> {
    let start = Instant::now();
    let grid: Vec<Xi> = match (&cfg.xi, cell.xi) {
        (_, Some(x)) => vec![x],
        (XiPolicy::Holdout(g), None) | (XiPolicy::Fixed(g), None) => g.clone(),
    };
    let ops: Vec<(Xi, PbdwOperator<T>)> = grid
        .iter()
        .map(|&x| operator(stage, x, cell.formulation).map(|op| (x, op)))
        .collect::<Result<_>>()?;
    let mut errors = Vec::with_capacity(prep.tests.len() * cfg.repetitions);
    let mut selected = Vec::new();
    let mut noise_checksum = 0.0;
    for (j, test) in prep.tests.iter().enumerate() {
        let level = NoiseLevel::from_probes(&test.probes, cell.snr)?;
        let clean = stage.obs.evaluate(&test.truth)?;
        let clean_h = stage.holdout_obs.as_ref().map(|(_, _, w)| w.adjoint() * &test.truth);
        for k in 0..cfg.repetitions {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_NOISE, j as u64, k as u64]));
            let eps: DVector<T> = draw_noise(stage.m, level, &mut rng);
            noise_checksum += checksum(&eps);
            let y = &clean + eps;
            let op = match (&stage.holdout_obs, cell.xi) {
                (Some((on_bg, on_rep, _)), None) => {
                    let yh = clean_h.as_ref().expect("holdout data") + draw_noise::<T, _>(on_bg.nrows(), level, &mut rng);
                    let hold = Holdout {
                        on_background: on_bg.clone(),
                        on_representers: on_rep.clone(),
                        values: yh,
                    };
                    let choice = select_xi_holdout(
                        |x| Ok(ops.iter().find(|(g, _)| *g == x).expect("grid operator").1.clone()),
                        &y,
                        &hold,
                        &grid,
                    )?;
                    selected.push(choice.xi);
                    &ops.iter().find(|(g, _)| *g == choice.xi).expect("grid operator").1
                }
                _ => &ops[0].1,
            };
            let est = op.solve(&y)?;
            let state = est.state.as_ref().expect("operator carries vectors");
            errors.push(relative_l2_error(&prep.space, state, &test.truth)?);
        }
    }
    let report_xi = match cell.xi {
        Some(x) => x,
        None => most_frequent(&selected).unwrap_or(grid[0]),
    };
    let stability = if cfg.skip_stability {
        None
    } else {
        let op = &ops.iter().find(|(g, _)| *g == report_xi).expect("grid operator").1;
        Some(stability_report(&prep.space, &stage.obs, op, LambdaUMethod::Subspace)?)
    };
    Ok(ResultRow {
        problem: cfg.problem,
        n: stage.n,
        m: stage.m,
        holdout: stage.holdout_obs.as_ref().map_or(0, |h| h.0.nrows()),
        snr: cell.snr,
        biased: cfg.biased,
        placement: placement_label(&cfg.placement),
        xi: cell.xi.map_or_else(|| "holdout".to_string(), |x| x.to_string()),
        formulation: cell.formulation,
        e_avg: mean(&errors),
        errors,
        selected_xi: selected,
        stability,
        noise_checksum,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        error: None,
    })
}

fn most_frequent(values: &[Xi]) -> Option<Xi> {
    let mut counts: BTreeMap<u64, (usize, Xi)> = BTreeMap::new();
    for &v in values {
        let e = counts.entry(v.value().to_bits()).or_insert((0, v));
        e.0 += 1;
    }
    counts.values().fold(None, |best: Option<(usize, Xi)>, &(c, x)| match best {
        Some((bc, bx)) if bc > c || (bc == c && bx.value() <= x.value()) => Some((bc, bx)),
        _ => Some((c, x)),
    })
    .map(|(_, x)| x)
}

fn failed_row(cfg: &ExperimentConfig, n: usize, cell: &Cell, err: &PbdwError) -> ResultRow {
    ResultRow {
        problem: cfg.problem,
        n,
        m: cfg.m_rule.m(n),
        holdout: 0,
        snr: cell.snr,
        biased: cfg.biased,
        placement: placement_label(&cfg.placement),
        xi: cell.xi.map_or_else(|| "holdout".to_string(), |x| x.to_string()),
        formulation: cell.formulation,
        e_avg: f64::NAN,
        errors: Vec::new(),
        selected_xi: Vec::new(),
        stability: None,
        noise_checksum: 0.0,
        elapsed_ms: 0.0,
        error: Some(format!("{}: {err}", err.kind())),
    }
}

fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let xis: Vec<Option<Xi>> = match &cfg.xi {
        XiPolicy::Fixed(g) => g.iter().map(|&x| Some(x)).collect(),
        XiPolicy::Holdout(_) => vec![None],
    };
    let mut out = Vec::new();
    for &snr in &cfg.snr_list {
        for &xi in &xis {
            for &formulation in &cfg.formulations {
                out.push(Cell { snr, xi, formulation });
            }
        }
    }
    out
}

fn sweep_prepared<T: Scalar>(prep: &Prepared<T>, cfg: &ExperimentConfig) -> Vec<ResultRow> {
    let cells = cells(cfg);
    cfg.n_list
        .par_iter()
        .flat_map_iter(|&n| {
            let stage = build_stage(prep, cfg, n);
            let rows: Vec<ResultRow> = cells
                .par_iter()
                .map(|cell| match &stage {
                    Ok(stage) => evaluate_cell(prep, cfg, stage, cell).unwrap_or_else(|e| failed_row(cfg, n, cell, &e)),
                    Err(e) => failed_row(cfg, n, cell, e),
                })
                .collect();
            for r in &rows {
                if let Some(e) = &r.error {
                    log::warn!("row N = {n}, SNR = {:?}, xi = {} failed: {e}", r.snr.0, r.xi);
                }
            }
            rows
        })
        .collect()
}

/// Runs every cell of the configuration; failed cells are recorded in
/// [`ResultRow::error`] and the sweep continues.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    match cfg.problem {
        ProblemId::AdvectionDiffusion => {
            let model = AdvectionDiffusion::new(cfg.grid_n)?;
            Ok(sweep_prepared(&prepare(&model, cfg)?, cfg))
        }
        ProblemId::Helmholtz => {
            let model = Helmholtz::new(cfg.grid_n)?;
            Ok(sweep_prepared(&prepare(&model, cfg)?, cfg))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub m: usize,
    pub snr: Snr,
    pub xi: String,
    pub linear_e_avg: f64,
    pub box_e_avg: f64,
    /// `box / linear`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub results: Vec<ResultRow>,
}

/// Linear and box-constrained runs on identical noise draws.
pub fn compare_formulations(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let mut cfg = cfg.clone();
    cfg.formulations = vec![Formulation::Linear, Formulation::Box];
    let results = run_sweep(&cfg)?;
    let mut rows = Vec::new();
    for pair in results.chunks(2) {
        let [lin, bx] = pair else {
            return Err(PbdwError::InvalidArgument("unpaired comparison rows".into()));
        };
        if lin.error.is_none() && bx.error.is_none() && lin.noise_checksum.to_bits() != bx.noise_checksum.to_bits() {
            return Err(PbdwError::InvalidArgument(format!(
                "noise draws differ between formulations at N = {}",
                lin.n
            )));
        }
        rows.push(ComparisonRow {
            n: lin.n,
            m: lin.m,
            snr: lin.snr,
            xi: lin.xi.clone(),
            linear_e_avg: lin.e_avg,
            box_e_avg: bx.e_avg,
            ratio: bx.e_avg / lin.e_avg,
        });
    }
    Ok(ComparisonReport { rows, results })
}

pub const CSV_HEADER: &str = "problem,n,m,holdout,snr,biased,placement,xi,formulation,e_avg,e_std,lambda2,lambda_u,lambda_bias,beta,lambda_nl,noise_checksum,status";

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mu = mean(v);
    (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_csv<W: Write>(mut out: W, rows: &[ResultRow]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let s = r.stability.as_ref();
        let snr = if r.snr.is_noiseless() { "inf".to_string() } else { r.snr.0.to_string() };
        let status = r.error.as_deref().map_or("ok".to_string(), |e| format!("\"{}\"", e.replace('"', "'")));
        writeln!(
            out,
            "{},{},{},{},{},{},\"{}\",{},{},{},{},{},{},{},{},{},{},{}",
            r.problem.label(),
            r.n,
            r.m,
            r.holdout,
            snr,
            r.biased,
            r.placement,
            r.xi,
            r.formulation.label(),
            r.e_avg,
            std_dev(&r.errors),
            opt(s.map(|s| s.lambda2)),
            opt(s.map(|s| s.lambda_u)),
            opt(s.map(|s| s.lambda_bias)),
            opt(s.map(|s| s.beta)),
            opt(s.map(|s| s.lambda_nl)),
            r.noise_checksum,
            status
        )?;
    }
    Ok(())
}

/// Writes `<stem>.csv` and the `<stem>.json` sidecar with the full config.
pub fn write_outputs(dir: &Path, stem: &str, cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    write_csv(std::io::BufWriter::new(csv), rows)?;
    let sidecar = serde_json::json!({ "config": cfg, "rows": rows });
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e_avg_examples() {
        let space = DiscreteSpace::<f64>::euclidean(2).unwrap().with_mass(DMatrix::identity(2, 2)).unwrap();
        let u = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(e_avg(&space, &[vec![u.clone()]], &[u.clone()]).unwrap(), 0.0);
        assert_eq!(e_avg(&space, &[vec![DVector::zeros(2)]], &[u.clone()]).unwrap(), 1.0);
        let a = &u * 1.1;
        let b = &u * 0.7;
        assert!((e_avg(&space, &[vec![a, b]], &[u.clone()]).unwrap() - 0.2).abs() < 1e-15);
        assert!(e_avg(&space, &[vec![u.clone()]], &[DVector::zeros(2)]).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        assert_ne!(derive_seed(0, &[4, 0, 1]), derive_seed(0, &[4, 1, 0]));
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
    }

    #[test]
    fn config_round_trips_and_applies_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"problem":"advection_diffusion","n_list":[2,4],"snr_list":["inf",10]}"#).unwrap();
        assert_eq!(cfg.repetitions, 50);
        assert_eq!(cfg.n_test, 10);
        assert_eq!(cfg.m_rule, MRule::Offset(3));
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let mut bad = cfg.clone();
        bad.m_rule = MRule::Fixed(1);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn most_frequent_prefers_smaller_on_ties() {
        let v = [Xi::Finite(1.0), Xi::Infinite, Xi::Infinite, Xi::Finite(1.0)];
        assert_eq!(most_frequent(&v), Some(Xi::Finite(1.0)));
        assert_eq!(most_frequent(&[]), None);
    }
}
