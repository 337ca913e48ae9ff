use thiserror::Error;

/// Errors surfaced by model construction and fitting.
#[derive(Error, Debug)]
pub enum Error {
    #[error("degenerate domain: lower ({0}) must be strictly below upper ({1})")]
    DegenerateDomain(f64, f64),

    #[error("at least one interior knot is required")]
    NoInteriorKnots(),

    #[error("evaluation point {x} outside basis boundary [{lo}, {hi}]")]
    OutsideBoundary { x: f64, lo: f64, hi: f64 },

    #[error("unsupported derivative order {0} (only 1 and 2 are available)")]
    UnsupportedDerivative(usize),

    #[error("exposure series must be strictly increasing and equally spaced at position {0}")]
    IrregularTimes(usize),

    #[error("exposure series has a non-finite value at position {0}")]
    NonFiniteExposure(usize),

    #[error("need at least {need} exposure observations, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error(
        "exposure support [{support_lo}, {support_hi}] does not cover the lag window of time {t}; \
         drop leading times with incomplete windows"
    )]
    IncompleteLagWindow {
        t: f64,
        support_lo: f64,
        support_hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("partition size {j} must be at least the basis dimension {d}")]
    PartitionTooSmall { j: usize, d: usize },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("{stage} optimization failed to converge after {iterations} iterations (grad norm {grad_norm:.3e})")]
    NoConvergence {
        stage: &'static str,
        iterations: usize,
        grad_norm: f64,
    },

    #[error("line search failed in {0}")]
    LineSearchFailed(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
