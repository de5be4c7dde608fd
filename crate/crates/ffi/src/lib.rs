//! C ABI over the real-valued PBDW estimator.
//!
//! Matrices are passed column-major. Every function returns a
//! [`PbdwStatus`]; on failure, the message is available from
//! [`pbdw_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use pbdw::analysis::{inf_sup_beta, lambda_nl_of};
use pbdw::background::BoxConstraints;
use pbdw::estimator::{PbdwOperator as Operator, Xi};
use pbdw::PbdwError;

/// Result codes of the C API.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PbdwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Singular = 4,
    NotConverged = 5,
    Panic = 6,
    Other = 7,
}

/// Opaque solver handle.
pub struct PbdwOperator {
    inner: Operator<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &PbdwError) -> PbdwStatus {
    match e {
        PbdwError::DimensionMismatch { .. } | PbdwError::TooFewMeasurements { .. } => PbdwStatus::DimensionMismatch,
        PbdwError::NotPositiveDefinite(_) | PbdwError::Singular(_) | PbdwError::RankDeficient { .. } => {
            PbdwStatus::Singular
        }
        PbdwError::NotConverged { .. } => PbdwStatus::NotConverged,
        PbdwError::InvalidArgument(_) => PbdwStatus::InvalidArgument,
        _ => PbdwStatus::Other,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (PbdwStatus, String)>) -> PbdwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PbdwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PbdwStatus::Panic
        }
    }
}

fn lift(e: PbdwError) -> (PbdwStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (PbdwStatus, String) {
    (PbdwStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (PbdwStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Assembles an operator from `L` (`m × n`), `K` (`m × m`) and `ξ`
/// (`INFINITY` allowed). `lower`/`upper` hold `n` bounds each, or are both
/// null for the linear estimator.
///
/// # Safety
/// Pointers must reference arrays of the stated sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pbdw_operator_new(
    l: *const f64,
    m: usize,
    n: usize,
    k: *const f64,
    xi: f64,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut PbdwOperator,
) -> PbdwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let l = DMatrix::from_column_slice(m, n, slice(l, m * n, "l")?);
        let k = DMatrix::from_column_slice(m, m, slice(k, m * m, "k")?);
        let xi = Xi::new(xi).map_err(lift)?;
        let bounds = match (lower.is_null(), upper.is_null()) {
            (true, true) => None,
            (false, false) => Some(
                BoxConstraints::new(
                    DVector::from_column_slice(slice(lower, n, "lower")?),
                    DVector::from_column_slice(slice(upper, n, "upper")?),
                )
                .map_err(lift)?,
            ),
            _ => {
                return Err((
                    PbdwStatus::InvalidArgument,
                    "lower and upper must both be null or both be set".into(),
                ))
            }
        };
        let inner = Operator::assemble(l, k, xi, bounds).map_err(lift)?;
        *out = Box::into_raw(Box::new(PbdwOperator { inner }));
        Ok(())
    })
}

/// Releases an operator; null is ignored.
///
/// # Safety
/// `op` must come from [`pbdw_operator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pbdw_operator_free(op: *mut PbdwOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Writes the dimensions `m` and `n` of an operator.
///
/// # Safety
/// `op` must be a live handle; `m` and `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pbdw_operator_dims(op: *const PbdwOperator, m: *mut usize, n: *mut usize) -> PbdwStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if m.is_null() || n.is_null() {
            return Err(null("m/n"));
        }
        *m = op.inner.m();
        *n = op.inner.n();
        Ok(())
    })
}

/// Solves for `y` (length `m`), writing `ẑ` (`n`), `η̂` (`m`) and, when
/// `objective` is non-null, the objective value.
///
/// # Safety
/// `y`, `z` and `eta` must reference arrays of the operator's sizes.
#[no_mangle]
pub unsafe extern "C" fn pbdw_operator_solve(
    op: *const PbdwOperator,
    y: *const f64,
    m: usize,
    z: *mut f64,
    eta: *mut f64,
    objective: *mut f64,
) -> PbdwStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if m != op.inner.m() {
            return Err(lift(PbdwError::DimensionMismatch {
                context: "measurements",
                expected: op.inner.m(),
                found: m,
            }));
        }
        let y = DVector::from_column_slice(slice(y, m, "y")?);
        let est = op.inner.solve(&y).map_err(lift)?;
        if (z.is_null() && op.inner.n() > 0) || eta.is_null() {
            return Err(null("z/eta"));
        }
        if op.inner.n() > 0 {
            std::slice::from_raw_parts_mut(z, op.inner.n()).copy_from_slice(est.z.as_slice());
        }
        std::slice::from_raw_parts_mut(eta, m).copy_from_slice(est.eta.as_slice());
        if !objective.is_null() {
            *objective = est.objective;
        }
        Ok(())
    })
}

/// Inf-sup constant `β_{N,M}` of the operator's `(L, K)`.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pbdw_inf_sup_beta(op: *const PbdwOperator, out: *mut f64) -> PbdwStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = inf_sup_beta(op.inner.l(), op.inner.k()).map_err(lift)?;
        Ok(())
    })
}

/// Nonlinear stability constant `Λ^nl` for the operator's box.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pbdw_lambda_nl(op: *const PbdwOperator, out: *mut f64) -> PbdwStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lambda_nl_of(&op.inner).map_err(lift)?;
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one, or 0 when
/// there is no error.
///
/// # Safety
/// `buf` must be writable for `len` bytes, or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn pbdw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pbdw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
