use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("subsystem index {index} out of range ({count} subsystems)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("steady state is not unique (singular value ratio {ratio:e})")]
    NonUniqueSteadyState { ratio: f64 },

    #[error("density matrix is not positive: minimum eigenvalue {min_eigenvalue:e}")]
    PositivityViolation { min_eigenvalue: f64 },

    #[error("density matrix invariant violated: {0}")]
    InvalidDensityMatrix(String),

    #[error("step size underflow at t = {t:e} (h = {step:e}); system too stiff for explicit integration")]
    Stiffness { t: f64, step: f64 },

    #[error("resolvent is singular at omega = {omega:e}")]
    Pole { omega: f64 },

    #[error("vanishing denominator in steady-state amplitude (|D| = {magnitude:e})")]
    SingularDenominator { magnitude: f64 },

    #[error("grid is not uniform (step {index} differs from the first by {deviation:e})")]
    NonUniformGrid { index: usize, deviation: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("no valid peaks remain after filtering")]
    NoValidPeaks,

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
