use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hurwitz: eigenvalue {re:.6e}{im:+.6e}i has non-negative real part")]
    NotHurwitz { re: f64, im: f64 },

    #[error("pair is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("conic problem infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
