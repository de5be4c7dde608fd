//! Background space `Z_N` and the coefficient box `Φ_N`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, PbdwError, Result};
use crate::hilbert::{orthonormalize, Basis, DiscreteSpace};
use crate::linalg::hermitian_eigen;
use crate::scalar::Scalar;

const RANK_TOL: f64 = 1e-14;

/// Best-knowledge solutions `u^bk(μⁱ)` as columns, with their parameters.
#[derive(Clone, Debug)]
pub struct SnapshotSet<T: Scalar> {
    fields: DMatrix<T>,
    parameters: Vec<Vec<f64>>,
}

impl<T: Scalar> SnapshotSet<T> {
    pub fn new(fields: DMatrix<T>, parameters: Vec<Vec<f64>>) -> Result<Self> {
        if fields.ncols() == 0 {
            return Err(PbdwError::InvalidArgument("snapshot set is empty".into()));
        }
        check_len("snapshot parameters", fields.ncols(), parameters.len())?;
        if let Some(j) = (0..fields.ncols()).find(|&j| fields.column(j).iter().any(|v| !v.is_finite())) {
            return Err(PbdwError::InvalidArgument(format!("snapshot {j} has non-finite entries")));
        }
        Ok(Self { fields, parameters })
    }

    /// Snapshots without parameter metadata (e.g. externally supplied states).
    pub fn from_fields(fields: DMatrix<T>) -> Result<Self> {
        let n = fields.ncols();
        Self::new(fields, vec![Vec::new(); n])
    }

    pub fn fields(&self) -> &DMatrix<T> {
        &self.fields
    }

    pub fn parameters(&self) -> &[Vec<f64>] {
        &self.parameters
    }

    pub fn len(&self) -> usize {
        self.fields.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.fields.nrows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Pod,
    StrongGreedy,
    External,
}

/// G-orthonormal background basis `ζ_1 … ζ_N`.
///
/// `values` holds POD eigenvalues or, for the greedy, the projection error
/// of the snapshot picked at each step.
#[derive(Clone, Debug)]
pub struct BackgroundBasis<T: Scalar> {
    basis: Basis<T>,
    values: Vec<f64>,
    kind: BasisKind,
}

impl<T: Scalar> BackgroundBasis<T> {
    /// Wraps arbitrary vectors after G-orthonormalizing them.
    pub fn from_vectors(space: &DiscreteSpace<T>, vectors: &DMatrix<T>) -> Result<Self> {
        let basis = orthonormalize(space, vectors)?;
        let n = basis.len();
        Ok(Self {
            basis,
            values: vec![f64::NAN; n],
            kind: BasisKind::External,
        })
    }

    pub fn basis(&self) -> &Basis<T> {
        &self.basis
    }

    pub fn vectors(&self) -> &DMatrix<T> {
        self.basis.vectors()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// First `n` modes; hierarchical for both POD and greedy.
    pub fn truncate(&self, n: usize) -> Self {
        Self {
            basis: self.basis.truncate(n),
            values: self.values.iter().take(n).copied().collect(),
            kind: self.kind,
        }
    }

    /// Coefficients `(u, ζ_n)` of every column of `u`.
    pub fn coefficients(&self, space: &DiscreteSpace<T>, u: &DMatrix<T>) -> Result<DMatrix<T>> {
        check_len("background coefficients", space.dim(), u.nrows())?;
        Ok(self.basis.vectors().adjoint() * space.apply_gram(u))
    }
}

/// Proper orthogonal decomposition in the G-inner product (method of snapshots).
pub fn pod<T: Scalar>(space: &DiscreteSpace<T>, snapshots: &SnapshotSet<T>, n: usize) -> Result<BackgroundBasis<T>> {
    check_len("pod", space.dim(), snapshots.dim())?;
    if n == 0 {
        return Err(PbdwError::InvalidArgument("N must be positive".into()));
    }
    let s = snapshots.fields();
    let gs = space.apply_gram(s);
    let corr = s.adjoint() * &gs;
    let (values, vectors) = hermitian_eigen(&corr);
    let k = values.len();
    let top = values[k - 1];
    let rank = values.iter().filter(|&&v| top > 0.0 && v >= RANK_TOL * top).count();
    if n > rank {
        return Err(PbdwError::ExceedsRank { requested: n, max: rank });
    }
    let mut modes = DMatrix::zeros(space.dim(), n);
    let mut eigen = Vec::with_capacity(n);
    for i in 0..n {
        let idx = k - 1 - i;
        let lambda = values[idx];
        let v = vectors.column(idx);
        let mode = (s * v) * T::from_real(1.0 / lambda.sqrt());
        modes.set_column(i, &mode);
        eigen.push(lambda);
    }
    // Polishes orthonormality lost to the squared conditioning of the correlation.
    let basis = orthonormalize(space, &modes)?;
    Ok(BackgroundBasis {
        basis,
        values: eigen,
        kind: BasisKind::Pod,
    })
}

/// POD eigenvalues of the snapshot set, in decreasing order.
pub fn pod_spectrum<T: Scalar>(space: &DiscreteSpace<T>, snapshots: &SnapshotSet<T>) -> Result<Vec<f64>> {
    check_len("pod", space.dim(), snapshots.dim())?;
    let s = snapshots.fields();
    let corr = s.adjoint() * space.apply_gram(s);
    let values = hermitian_eigen(&corr).0;
    Ok(values.iter().rev().copied().collect())
}

/// Strong greedy on the true G-norm projection error.
pub fn strong_greedy<T: Scalar>(
    space: &DiscreteSpace<T>,
    snapshots: &SnapshotSet<T>,
    n: usize,
) -> Result<BackgroundBasis<T>> {
    check_len("strong greedy", space.dim(), snapshots.dim())?;
    if n == 0 {
        return Err(PbdwError::InvalidArgument("N must be positive".into()));
    }
    let mut r = snapshots.fields().clone();
    let mut gr = space.apply_gram(&r);
    let sq_norms = |r: &DMatrix<T>, gr: &DMatrix<T>| -> Vec<f64> {
        (0..r.ncols())
            .map(|j| r.column(j).dotc(&gr.column(j)).real().max(0.0))
            .collect()
    };
    let initial = sq_norms(&r, &gr);
    let top = initial.iter().cloned().fold(0.0, f64::max);
    let mut modes = DMatrix::zeros(space.dim(), n);
    let mut errors = Vec::with_capacity(n);
    let mut norms = initial;
    for step in 0..n {
        let (pick, err2) = norms
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        if !(top > 0.0) || err2 < RANK_TOL * top {
            return Err(PbdwError::ExceedsRank { requested: n, max: step });
        }
        let mut v = r.column(pick).into_owned();
        // One reorthogonalization against the modes chosen so far.
        for i in 0..step {
            let zi = modes.column(i);
            let coeff = (space.gram() * zi).dotc(&v);
            v.axpy(-coeff, &zi, T::one());
        }
        let gv = space.gram() * &v;
        let nv = v.dotc(&gv).real().max(0.0).sqrt();
        let inv = T::from_real(1.0 / nv);
        let z = v * inv;
        let gz = gv * inv;
        let coeffs = gz.adjoint() * &r;
        r -= &z * &coeffs;
        gr -= &gz * &coeffs;
        norms = sq_norms(&r, &gr);
        modes.set_column(step, &z);
        errors.push(err2.sqrt());
    }
    Ok(BackgroundBasis {
        basis: Basis::orthonormal(space, modes)?,
        values: errors,
        kind: BasisKind::StrongGreedy,
    })
}

/// Coordinate-wise bounds `a ≤ z ≤ b`; complex problems carry `2N` bounds,
/// real parts first.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxConstraints {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxConstraints {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_len("box bounds", lower.len(), upper.len())?;
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i]) || lower[i].is_nan()) {
            return Err(PbdwError::InvalidArgument(format!(
                "box bound {i} has lower {} > upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `Φ_N = ℝⁿ`.
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().all(|a| *a == f64::NEG_INFINITY) && self.upper.iter().all(|b| *b == f64::INFINITY)
    }

    /// Indices with `a_n < b_n`.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.lower[i] < self.upper[i]).collect()
    }

    pub fn project(&self, z: &mut DVector<f64>) {
        for i in 0..z.len() {
            z[i] = z[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        z.len() == self.len()
            && (0..z.len()).all(|i| z[i] >= self.lower[i] - tol && z[i] <= self.upper[i] + tol)
    }

    /// Widens every finite interval by `margin · (b − a)` on both sides.
    pub fn with_margin(&self, margin: f64) -> Self {
        let width = &self.upper - &self.lower;
        let pad = width.map(|w| if w.is_finite() { margin * w } else { 0.0 });
        Self {
            lower: &self.lower - &pad,
            upper: &self.upper + &pad,
        }
    }

    /// Bounds from an explicit `N × n` coefficient sample (real, or complex split into parts).
    pub fn from_coefficients<T: Scalar>(coeffs: &DMatrix<T>) -> Result<Self> {
        if coeffs.ncols() == 0 {
            return Err(PbdwError::InvalidArgument("no coefficient samples".into()));
        }
        let n = coeffs.nrows();
        let parts = if T::IS_COMPLEX { 2 } else { 1 };
        let mut lower = DVector::from_element(parts * n, f64::INFINITY);
        let mut upper = DVector::from_element(parts * n, f64::NEG_INFINITY);
        for j in 0..coeffs.ncols() {
            for i in 0..n {
                let c = coeffs[(i, j)];
                let vals = [c.re(), c.im()];
                for (p, v) in vals.iter().take(parts).enumerate() {
                    let k = i + p * n;
                    lower[k] = lower[k].min(*v);
                    upper[k] = upper[k].max(*v);
                }
            }
        }
        Self::new(lower, upper)
    }
}

fn encode_bound(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

fn decode_bound(v: &serde_json::Value) -> std::result::Result<f64, String> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| "bad number".into()),
        serde_json::Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        serde_json::Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        other => Err(format!("invalid bound {other}")),
    }
}

impl Serialize for BoxConstraints {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw {
            lower: Vec<serde_json::Value>,
            upper: Vec<serde_json::Value>,
        }
        Raw {
            lower: self.lower.iter().map(|v| encode_bound(*v)).collect(),
            upper: self.upper.iter().map(|v| encode_bound(*v)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoxConstraints {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lower: Vec<serde_json::Value>,
            upper: Vec<serde_json::Value>,
        }
        let raw = Raw::deserialize(d)?;
        let conv = |v: &[serde_json::Value]| -> std::result::Result<DVector<f64>, D::Error> {
            let xs: std::result::Result<Vec<f64>, String> = v.iter().map(decode_bound).collect();
            xs.map(DVector::from_vec).map_err(serde::de::Error::custom)
        };
        BoxConstraints::new(conv(&raw.lower)?, conv(&raw.upper)?).map_err(serde::de::Error::custom)
    }
}

/// `a_n = min_i (u_i, ζ_n)`, `b_n = max_i (u_i, ζ_n)` over the training snapshots,
/// optionally widened by a relative `margin`.
pub fn coefficient_bounds<T: Scalar>(
    space: &DiscreteSpace<T>,
    basis: &BackgroundBasis<T>,
    snapshots: &SnapshotSet<T>,
    margin: f64,
) -> Result<BoxConstraints> {
    if !basis.basis().is_orthonormal() {
        return Err(PbdwError::NotOrthonormal);
    }
    if snapshots.is_empty() {
        return Err(PbdwError::InvalidArgument("no snapshots".into()));
    }
    let coeffs = basis.coefficients(space, snapshots.fields())?;
    let bounds = BoxConstraints::from_coefficients(&coeffs)?;
    Ok(if margin > 0.0 { bounds.with_margin(margin) } else { bounds })
}
