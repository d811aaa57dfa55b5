use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A state coordinate is NaN or infinite.
    #[error("invalid state at step {step}: {coords:?}")]
    InvalidState { step: isize, coords: Vec<f64> },

    /// The pushed-forward unstable direction collapsed to (numerically) zero.
    #[error("degenerate tangent at step {step}: |D q| = {norm:e}")]
    DegenerateTangent { step: isize, norm: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("trajectory too short: need {needed} points past the run-up, have {available}")]
    InsufficientTrajectory { needed: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures caused by the dynamics rather than by the caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InvalidState { .. } | Error::DegenerateTangent { .. }
        )
    }
}
