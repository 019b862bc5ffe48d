use thiserror::Error;

/// Errors produced by the simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("memory budget exceeded: need {needed} bytes, budget is {budget} bytes (set LMSV_LAB_BUDGET_BYTES to raise it)")]
    Budget { needed: u64, budget: u64 },

    #[error("regime boundary: competing rate exponents {hermite_exponent} and {stable_exponent} coincide; no limit theorem covers equality")]
    Boundary {
        hermite_exponent: f64,
        stable_exponent: f64,
    },

    #[error("moment of order {p} is infinite for tail index {alpha}")]
    InfiniteMoment { p: f64, alpha: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("circulant embedding has negative eigenvalue {min_eigenvalue}")]
    NegativeSpectrum { min_eigenvalue: f64 },

    #[error("path has no innovations (built by circulant embedding); operation needs the moving-average representation")]
    MissingInnovations,

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
