use alloc::string::String;

/// Errors raised by the library. Verdict-style checks never error; they
/// return a report with `pass = false` instead.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySamples,

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("grid has {nodes} nodes, cap is {cap}")]
    GridTooLarge { nodes: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (1..=3 allowed)")]
    UnsupportedDimension(usize),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("grid box holds mass {mass:.6}, at least {required:.6} required")]
    InsufficientCoverage { mass: f64, required: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {0} is outside the strict interior band")]
    LevelOutOfRange(f64),

    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),

    #[error("problem size {size} exceeds cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },

    #[error("solver did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("source row {0} carries no mass")]
    ZeroMassRow(usize),

    #[error("forward/inverse composition residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    NonInvertible { residual: f64, tolerance: f64 },

    #[error("grids differ")]
    GridsDiffer,

    #[error("point is not on the intersection set (|F_z - F_z'| = {0:.3e})")]
    NotOnIntersection(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("point lies outside the support band")]
    OutsideSupport,

    #[error("empty isoquant at level {0}")]
    EmptyIsoquant(f64),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("inversion of the second stage failed at {0}")]
    InversionFailed(String),

    #[error("identification assumptions fail: {0}")]
    AssumptionFailure(String),

    #[error("conditioning bin holds {count} observations, at least {required} required")]
    SparseBin { count: usize, required: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
