use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the mesh redistribution pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("cumulative table is not strictly increasing at sample {index}")]
    NonMonotoneTable { index: usize },

    #[error("density is not separable along an orthogonal, lattice-compatible pair: {0}")]
    NotSeparable(String),

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    #[error("step rejected: potential lost convexity at node ({i}, {j}) with dt = {dt:e}")]
    StepRejected { i: usize, j: usize, dt: f64 },

    #[error("singular Jacobian (det = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("metric tensor is not positive definite")]
    NonPositiveMetric,

    #[error("Jacobian is not symmetric (|a12 - a21| = {asymmetry:e})")]
    AsymmetricJacobian { asymmetry: f64 },

    #[error("level-set gradient vanishes; feature normal is undefined")]
    ZeroGradient,

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
