use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("form is not closed (relative residual {residual:.3e} exceeds {tolerance:.1e})")]
    NotClosed { residual: f64, tolerance: f64 },

    #[error("insufficient resolution: {0}; refine the grid")]
    Resolution(String),

    #[error("flow integration failed: {0}; refine the time grid")]
    Integration(String),

    #[error("endpoint infeasible: residual {residual:.3e} exceeds {tolerance:.1e}")]
    Infeasible { residual: f64, tolerance: f64 },

    #[error("unsupported lattice rank {0} (maximum 12)")]
    UnsupportedRank(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
