//! Observation functionals, their Riesz representers, the kernel matrix `K`,
//! the background observation matrix `L`, and synthetic noisy measurements.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::background::BackgroundBasis;
use crate::error::{check_len, PbdwError, Result};
use crate::hilbert::{Basis, DiscreteSpace};
use crate::linalg::{embed, hermitian_eigen, hermitize, singular_value_range};
use crate::models::{Grid, Point};
use crate::scalar::Scalar;

/// Default Gaussian width of the observation kernel.
pub const DEFAULT_WIDTH: f64 = 0.01;
/// Default number of random probes used to calibrate the noise level.
pub const DEFAULT_PROBES: usize = 100;

const UNDER_RESOLVED_NODES: usize = 4;
const DEPENDENCE_TOL: f64 = 1e-12;

/// Linear functional `ℓ(v) = lᵀ v` on nodal vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Functional {
    pub weights: DVector<f64>,
    pub center: Option<Point>,
    pub width: Option<f64>,
}

impl Functional {
    pub fn from_weights(weights: DVector<f64>) -> Self {
        Self {
            weights,
            center: None,
            width: None,
        }
    }

    /// Point evaluation at node `index` of a space of dimension `dim`.
    pub fn nodal(dim: usize, index: usize) -> Self {
        let mut w = DVector::zeros(dim);
        w[index] = 1.0;
        Self::from_weights(w)
    }

    pub fn apply<T: Scalar>(&self, v: &DVector<T>) -> T {
        self.weights
            .iter()
            .zip(v.iter())
            .fold(T::zero(), |acc, (w, x)| acc + *x * T::from_real(*w))
    }
}

/// Gaussian-convolution functional centred at `center` with standard
/// deviation `width`, normalized so that `ℓ(1) = 1`.
pub fn gaussian_functional(grid: &Grid, center: Point, width: f64) -> Result<Functional> {
    if !(width > 0.0) {
        return Err(PbdwError::InvalidArgument(format!(
            "Gaussian width must be positive, got {width}"
        )));
    }
    if !grid.domain.contains(center) {
        return Err(PbdwError::InvalidArgument(format!(
            "center {center:?} outside the domain"
        )));
    }
    let scale = 1.0 / (2.0 * width * width);
    let raw: Vec<f64> = grid
        .points
        .iter()
        .zip(&grid.weights)
        .map(|(p, w)| {
            let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            w * (-d2 * scale).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(PbdwError::InvalidArgument(format!(
            "Gaussian at {center:?} with width {width} carries no quadrature weight"
        )));
    }
    let weights = DVector::from_iterator(raw.len(), raw.iter().map(|w| w / total));
    let support = weights.iter().filter(|&&w| w > 1e-14).count();
    if support < UNDER_RESOLVED_NODES {
        log::warn!(
            "Gaussian functional at {center:?} is under-resolved: {support} nodes carry weight"
        );
    }
    Ok(Functional {
        weights,
        center: Some(center),
        width: Some(width),
    })
}

/// M functionals with their representers `q_m = G⁻¹ l_m` and `K = (q_m, q_m')`.
#[derive(Clone, Debug)]
pub struct ObservationSet<T: Scalar> {
    functionals: Vec<Functional>,
    weights: DMatrix<T>,
    representers: Basis<T>,
    kernel: DMatrix<T>,
}

impl<T: Scalar> ObservationSet<T> {
    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    /// `𝒩 × M` matrix stacking the functional weights.
    pub fn weights(&self) -> &DMatrix<T> {
        &self.weights
    }

    pub fn representers(&self) -> &Basis<T> {
        &self.representers
    }

    pub fn kernel(&self) -> &DMatrix<T> {
        &self.kernel
    }

    pub fn centers(&self) -> Vec<Option<Point>> {
        self.functionals.iter().map(|f| f.center).collect()
    }

    /// `ℓ(v) = [ℓ_1(v), …, ℓ_M(v)]`.
    pub fn evaluate(&self, v: &DVector<T>) -> Result<DVector<T>> {
        check_len("functional evaluation", self.weights.nrows(), v.len())?;
        Ok(self.weights.adjoint() * v)
    }

    /// Applies every functional to every column of `v`.
    pub fn evaluate_columns(&self, v: &DMatrix<T>) -> Result<DMatrix<T>> {
        check_len("functional evaluation", self.weights.nrows(), v.nrows())?;
        Ok(self.weights.adjoint() * v)
    }

    /// Subset of the functionals, keeping representers and kernel consistent.
    pub fn select(&self, indices: &[usize]) -> ObservationSet<T> {
        let functionals = indices.iter().map(|&i| self.functionals[i].clone()).collect();
        let weights = self.weights.select_columns(indices);
        let representers = Basis::new(self.representers.vectors().select_columns(indices));
        let kernel = self.kernel.select_rows(indices).select_columns(indices);
        ObservationSet {
            functionals,
            weights,
            representers,
            kernel,
        }
    }
}

/// Computes representers and the kernel matrix, rejecting dependent functionals.
pub fn riesz_representers<T: Scalar>(
    space: &DiscreteSpace<T>,
    functionals: Vec<Functional>,
) -> Result<ObservationSet<T>> {
    if functionals.is_empty() {
        return Err(PbdwError::InvalidArgument("need at least one functional".into()));
    }
    let dim = space.dim();
    let mut w = DMatrix::<f64>::zeros(dim, functionals.len());
    for (m, f) in functionals.iter().enumerate() {
        check_len("functional weights", dim, f.weights.len())?;
        if f.weights.iter().any(|x| !x.is_finite()) {
            return Err(PbdwError::InvalidArgument(format!(
                "functional {m} has non-finite weights"
            )));
        }
        w.set_column(m, &f.weights);
    }
    let weights: DMatrix<T> = embed(&w);
    let q = space.solve_gram(&weights)?;
    let kernel = hermitize(&(weights.adjoint() * &q));
    let (values, vectors) = hermitian_eigen(&kernel);
    let lo = values[0];
    let hi = values[values.len() - 1];
    if !(hi > 0.0) || lo < DEPENDENCE_TOL * hi {
        let v = vectors.column(0);
        let peak = v.iter().map(|x| x.modulus()).fold(0.0, f64::max);
        let indices = (0..v.len()).filter(|&i| v[i].modulus() > 0.1 * peak).collect();
        return Err(PbdwError::DependentFunctionals { indices });
    }
    Ok(ObservationSet {
        functionals,
        weights,
        representers: Basis::new(q),
        kernel,
    })
}

/// `L_{m,n} = ℓ_m(ζ_n)`; requires `M ≥ N`.
pub fn build_l<T: Scalar>(obs: &ObservationSet<T>, background: &BackgroundBasis<T>) -> Result<DMatrix<T>> {
    let (m, n) = (obs.len(), background.len());
    if m < n {
        return Err(PbdwError::TooFewMeasurements { m, n });
    }
    let l = obs.evaluate_columns(background.basis().vectors())?;
    let (smin, smax) = singular_value_range(&l);
    log::debug!("L is {m}x{n}, singular values in [{smin:.3e}, {smax:.3e}]");
    Ok(l)
}

/// Signal-to-noise ratio; `f64::INFINITY` means noiseless data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snr(pub f64);

impl Snr {
    pub const NOISELESS: Snr = Snr(f64::INFINITY);

    pub fn is_noiseless(&self) -> bool {
        self.0.is_infinite()
    }
}

impl Serialize for Snr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Snr(x)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(Snr::NOISELESS),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid SNR '{t}'"))),
        }
    }
}

/// Homoscedastic Gaussian noise levels, separate for real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub sigma_re: f64,
    pub sigma_im: f64,
}

impl NoiseLevel {
    pub const ZERO: NoiseLevel = NoiseLevel {
        sigma_re: 0.0,
        sigma_im: 0.0,
    };

    /// `σ = std(probe values) / SNR`, using the sample standard deviation.
    pub fn from_probes<T: Scalar>(probe_values: &[T], snr: Snr) -> Result<Self> {
        if !(snr.0 > 0.0) {
            return Err(PbdwError::InvalidArgument(format!(
                "SNR must be positive, got {}",
                snr.0
            )));
        }
        if snr.is_noiseless() {
            return Ok(Self::ZERO);
        }
        let re: Vec<f64> = probe_values.iter().map(|v| v.re()).collect();
        let im: Vec<f64> = probe_values.iter().map(|v| v.im()).collect();
        Ok(Self {
            sigma_re: sample_std(&re) / snr.0,
            sigma_im: if T::IS_COMPLEX { sample_std(&im) / snr.0 } else { 0.0 },
        })
    }
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// Values of Gaussian functionals at `count` uniformly drawn probe centers.
pub fn probe_values<T: Scalar, R: Rng + ?Sized>(
    grid: &Grid,
    u: &DVector<T>,
    width: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    (0..count)
        .map(|_| {
            let center = grid.domain.sample(rng);
            Ok(gaussian_functional(grid, center, width)?.apply(u))
        })
        .collect()
}

/// Noise-free data plus the draw that polluted it.
#[derive(Clone, Debug)]
pub struct Measurements<T: Scalar> {
    pub values: DVector<T>,
    pub noise: DVector<T>,
    pub level: NoiseLevel,
}

/// Draws `ε ∼ N(0, σ²)` (independently for real and imaginary parts).
pub fn draw_noise<T: Scalar, R: Rng + ?Sized>(len: usize, level: NoiseLevel, rng: &mut R) -> DVector<T> {
    DVector::from_fn(len, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = if T::IS_COMPLEX { StandardNormal.sample(rng) } else { 0.0 };
        T::from_parts(level.sigma_re * re, level.sigma_im * im)
    })
}

/// `y = ℓ(u_true) + ε` with σ calibrated from probe values.
pub fn synthesize_measurements<T: Scalar, R: Rng + ?Sized>(
    u_true: &DVector<T>,
    obs: &ObservationSet<T>,
    snr: Snr,
    probes: &[T],
    rng: &mut R,
) -> Result<Measurements<T>> {
    let level = NoiseLevel::from_probes(probes, snr)?;
    let clean = obs.evaluate(u_true)?;
    let noise = if snr.is_noiseless() {
        DVector::zeros(clean.len())
    } else {
        draw_noise(clean.len(), level, rng)
    };
    Ok(Measurements {
        values: clean + &noise,
        noise,
        level,
    })
}
