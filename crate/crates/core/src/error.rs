use thiserror::Error;

/// Errors raised by the solver, the data builders and the experiment harness.
#[derive(Debug, Error)]
pub enum SqgError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("exponent must be non-negative, got {0}")]
    NegativeExponent(f64),
    #[error("field has nonzero mean ({0:e}); inverse powers of the Laplacian need mean-zero input")]
    NonzeroMean(f64),
    #[error("unsupported Lebesgue exponent p = {0}; only 2 and infinity are available")]
    UnsupportedNorm(f64),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error("strip |k1 - k2| <= {width} has no lattice point inside the annulus (dk = {dk})")]
    UnresolvableStrip { width: f64, dk: f64 },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("adaptive quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    Quadrature { tol: f64, a: f64, b: f64 },
    #[error("degenerate inequality trial: {0}")]
    DegenerateTrial(&'static str),
    #[error("field is identically zero")]
    ZeroField,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("sampling interval {interval} exceeds {limit} required for finite differencing")]
    InsufficientSampling { interval: f64, limit: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SqgError>;

impl SqgError {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        SqgError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
