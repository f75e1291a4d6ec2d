use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("probability {0} is outside the open interval (0, 1)")]
    InvalidProbability(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("bet ratio {nu} is inadmissible at p = {p}: capital could become non-positive")]
    Inadmissible { nu: f64, p: f64 },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("quadrature grid of {nodes} nodes exceeds the cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid feature spec: {0}")]
    InvalidFeatureSpec(String),

    #[error("exogenous column `{0}` is not available")]
    MissingExogenous(String),

    #[error("information matrix is not positive definite; the parameter is not identifiable")]
    NotIdentifiable,

    #[error("maximum likelihood diverges after {iterations} iterations along direction {direction:?} (separated data)")]
    Separated { direction: Vec<f64>, iterations: usize },

    #[error("maximum likelihood did not converge")]
    NotConverged,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("data set is empty")]
    EmptyData,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
