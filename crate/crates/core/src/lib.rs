//! Parameterized-Background Data-Weak state estimation.
//!
//! A state is reconstructed as `û = ẑ + η̂`, with `ẑ` drawn from a reduced
//! background space built from a parametric model and `η̂` from the span of
//! the Riesz representers of the observation functionals. Both the linear
//! (Tikhonov-weighted) estimator and its box-constrained variant are
//! provided, together with stability constants, sensor placement and an
//! experiment harness.

pub mod analysis;
pub mod background;
pub mod bench;
pub mod bundle;
pub mod error;
pub mod estimator;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod models;
pub mod observe;
pub mod qp;
pub mod scalar;
pub mod sensors;

pub use error::{PbdwError, Result};
pub use scalar::Scalar;
