use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty matrix")]
    Empty,

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("nonzero diagonal entry {value:e} at index {index}")]
    NonzeroDiagonal { index: usize, value: f64 },

    #[error("zero matrix has no direction")]
    ZeroNorm,

    #[error("Frobenius norm {norm} is not within 1e-9 of 1")]
    NotUnitNorm { norm: f64 },

    #[error("matrix is not symmetric (max |X - X^T| = {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not normalized Stiefel (orthonormality residual {orthonormality:e}, row-norm residual {row_norm:e})")]
    NotNormalizedStiefel { orthonormality: f64, row_norm: f64 },

    #[error("angles violate the n-gon constraint (residual {residual:e})")]
    NgonConstraint { residual: f64 },

    #[error("not an equilibrium (residual {residual:e})")]
    NotEquilibrium { residual: f64 },

    #[error("time {t} is at or beyond the escape time {t_escape}")]
    BeyondEscapeTime { t: f64, t_escape: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailed {
        t: f64,
        reason: String,
        last_state: Vec<f64>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
