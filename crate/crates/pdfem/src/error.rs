//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by mesh generation, assembly, solving or the study driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),

    #[error("quadrature: requested exactness degree {0} exceeds the supported maximum of 8")]
    UnsupportedQuadratureDegree(usize),

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("boundary face {face} has no assigned role")]
    UnassignedBoundaryFace { face: usize },

    #[error("adjoint operator is not configured for problem '{0}'")]
    AdjointNotConfigured(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear system is singular: zero pivot at elimination step {step}")]
    Singular { step: usize },

    #[error(
        "solver did not meet the residual contract: achieved {achieved:.3e}, required {required:.3e}"
    )]
    ResidualNotMet { achieved: f64, required: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
