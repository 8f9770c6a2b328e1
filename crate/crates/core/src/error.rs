//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hardware spec: {0}")]
    InvalidSpec(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("projection did not converge within {max_iter} iterations (residual {residual:.3e})")]
    ProjectionNotConverged { max_iter: usize, residual: f64 },

    #[error("degenerate sampling pattern: |F F' w| = {value:.3e} at sample {index}")]
    DegenerateSampling { index: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
