//! Error type shared by the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector/measure lengths do not match.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A coefficient index does not belong to the system.
    #[error("unknown index: {0}")]
    UnknownIndex(String),

    /// An argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Iterative projection stopped above tolerance; carries the achieved
    /// dual residual so callers can decide whether the iterate is usable.
    #[error("projection did not converge: dual residual {dual_residual:e} > tol {tol:e} after {iterations} iterations")]
    ProjectionDidNotConverge {
        dual_residual: f64,
        tol: f64,
        iterations: usize,
    },

    /// Brute-force enumeration would exceed the configured cap.
    #[error("support enumeration too large: C({n},{v}) = {count} exceeds cap {cap}")]
    CombinatorialCap {
        n: usize,
        v: usize,
        count: u128,
        cap: u128,
    },

    /// A precondition on the input data failed (e.g. class membership).
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}
