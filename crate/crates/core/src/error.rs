use thiserror::Error;

/// Errors raised by the numerical kernel, the model/kernel evaluators and the
/// heatball quadratures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error(
        "adaptive quadrature did not converge: worst subinterval [{lo}, {hi}] \
         carries error estimate {error_estimate:e} (tolerance {tolerance:e})"
    )]
    QuadratureNonConvergence {
        lo: f64,
        hi: f64,
        error_estimate: f64,
        tolerance: f64,
    },

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("ODE step size underflow at s = {at} (step {step:e}); problem may be stiff")]
    StepUnderflow { at: f64, step: f64 },

    #[error("ill-conditioned input: {0}")]
    IllConditioned(String),

    #[error("{what}: iteration cap of {iterations} reached")]
    IterationCap {
        what: &'static str,
        iterations: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside the model domain: {0}")]
    OutOfDomain(String),

    #[error("backward time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("spectral truncation needs order {required} at tau = {tau:e}, above the cap {cap}")]
    TruncationCap {
        required: usize,
        cap: usize,
        tau: f64,
    },

    #[error(
        "curvature hypothesis violated: need Ric >= {required} g but the model only has \
         Ric >= {actual} g"
    )]
    CurvatureHypothesis { required: f64, actual: f64 },

    #[error("heatball scale r = {r} rejected: {reason}")]
    ScaleTooLarge { r: f64, reason: String },

    #[error("shooting target {target} is beyond the reachable range {reachable}")]
    ShootingRange { target: f64, reachable: f64 },

    #[error("unsupported combination: {0}")]
    Mismatch(String),

    #[error("level {level} exceeds the admissible threshold {threshold}")]
    ThresholdExceeded { level: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
