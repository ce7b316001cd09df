use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("Fock truncation too small: tail weight {tail:.3e} beyond n_max = {n_max}")]
    TruncationTooSmall { n_max: usize, tail: f64 },

    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    NoConvergence { estimate: f64, tol: f64 },

    #[error("selection is empty: {0}")]
    EmptySelection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
