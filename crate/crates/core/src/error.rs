use thiserror::Error;

/// Errors produced by the simulation, regression, smoothing and margin code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate variable `{0}`: max equals min")]
    DegenerateVariable(String),

    #[error("design matrix is rank deficient at column {index} (`{label}`)")]
    RankDeficient { index: usize, label: String },

    #[error("ill-conditioned design matrix (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("collinear centres: the affine block has rank below 3")]
    DegenerateGeometry,

    #[error("payoff is not Lipschitz continuous: {0}")]
    NonLipschitzPayoff(String),

    #[error("missing parameter: {0}")]
    MissingParameter(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
