use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("unsupported dimension {dim}: {reason}")]
    Dimension { dim: usize, reason: &'static str },

    #[error("matrix at {point:?} is not symmetric positive definite (smallest eigenvalue {min_eig:e})")]
    NotSpd { point: Vec<f64>, min_eig: f64 },

    #[error("degenerate ellipticity: smallest eigenvalue {0:e} over the sample set")]
    DegenerateEllipticity(f64),

    #[error("coefficient evaluated at its discontinuity point {0:?}")]
    SingularPoint(Vec<f64>),

    #[error("empty sample set in ball of radius {0}")]
    EmptySample(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("resolution too coarse for {what}; minimum admissible value {min}")]
    Resolution { what: String, min: f64 },

    #[error("linear solve stopped after {iterations} iterations with relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("assembled system is singular; null vector supported at node {node}")]
    Singular { node: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("very-weak certification missing or failed: {0}")]
    Certification(String),

    #[error("inconsistent state: {0}")]
    Inconsistent(String),

    #[error("cannot parse `{spec}`: {reason}")]
    Parse { spec: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(spec: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::Parse {
            spec: spec.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
