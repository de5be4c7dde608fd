use thiserror::Error;

/// Errors reported by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum PbdwError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("column {index} is linearly dependent on the preceding columns")]
    RankDeficient { index: usize },
    #[error("observation functionals are linearly dependent (indices {indices:?})")]
    DependentFunctionals { indices: Vec<usize> },
    #[error("need at least as many measurements as background modes (M = {m}, N = {n})")]
    TooFewMeasurements { m: usize, n: usize },
    #[error("requested {requested} modes but the snapshot set supports at most {max}")]
    ExceedsRank { requested: usize, max: usize },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("basis is not flagged orthonormal")]
    NotOrthonormal,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("sensor placement failed: {0}")]
    Placement(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PbdwError {
    /// Stable machine-readable identifier, used by the CLI error JSON and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            PbdwError::DimensionMismatch { .. } => "dimension_mismatch",
            PbdwError::NotPositiveDefinite(_) => "not_positive_definite",
            PbdwError::RankDeficient { .. } => "rank_deficient",
            PbdwError::DependentFunctionals { .. } => "dependent_functionals",
            PbdwError::TooFewMeasurements { .. } => "too_few_measurements",
            PbdwError::ExceedsRank { .. } => "exceeds_rank",
            PbdwError::Singular(_) => "singular",
            PbdwError::NotOrthonormal => "not_orthonormal",
            PbdwError::InvalidArgument(_) => "invalid_argument",
            PbdwError::NotConverged { .. } => "not_converged",
            PbdwError::Placement(_) => "placement",
            PbdwError::Parse(_) => "parse",
            PbdwError::Io(_) => "io",
            PbdwError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, PbdwError>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(PbdwError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
