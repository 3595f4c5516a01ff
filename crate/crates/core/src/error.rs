use thiserror::Error;

/// Errors produced by the estimators, the simulation harness and the loaders.
///
/// The type is `Clone` so that per-sample factorizations can cache a failure
/// and hand it to every estimator that asks for it.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid eigenvalue recipe: {0}")]
    InvalidRecipe(String),

    #[error("unsupported gamma {0}: only 0 and 1 are simulated")]
    UnsupportedGamma(f64),

    #[error("invalid innovation law: {0}")]
    InvalidLaw(String),

    #[error("Hessian of the quadratic loss is singular (sample mean collinear with target)")]
    DegenerateHessian,

    #[error("target vector has a vanishing quadratic form")]
    DegenerateTarget,

    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(&'static str),

    #[error("sample covariance matrix is singular although p < n")]
    SingularSample,

    #[error("p = n = {0}: neither the inverse nor the pseudo-inverse branch applies")]
    EqualDimensions(usize),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("concentration c = {0} outside (0, 1)")]
    UnsupportedConcentration(f64),

    #[error("moments of the noncentral F law do not exist (denominator d.f. {0} <= 4)")]
    MomentsDoNotExist(usize),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("ragged rows: row {row} has {got} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
