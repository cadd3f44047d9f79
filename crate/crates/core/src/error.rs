use thiserror::Error;

/// Errors raised by the model, solvers and runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("mass drift {drift:e} exceeds tolerance {tol:e}")]
    MassDrift { drift: f64, tol: f64 },

    #[error("negative undershoot {value:e} in cell {cell}")]
    NegativeUndershoot { value: f64, cell: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("generator has more than one invariant density (TV between candidates {tv:e})")]
    MultipleNullVectors { tv: f64 },

    #[error("stationary mass piles up at the truncation edge ({edge_mass:e}); consistent with sweeping")]
    TruncationEdge { edge_mass: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {v}")))
    }
}
