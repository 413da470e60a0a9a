use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("{what} is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { what: &'static str, deviation: f64 },

    #[error("Lindblad operator does not commute with H: ||[H,L]||_2 = {norm:.6e} (allowed {allowed:.3e})")]
    NotCommuting { norm: f64, allowed: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("derivative is not traceless (trace = {trace:.3e})")]
    NotTraceless { trace: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("positivity violated after integration: min eigenvalue {min_eigenvalue:.3e}; retry with dt <= {suggested_dt:.3e}")]
    Positivity { min_eigenvalue: f64, suggested_dt: f64 },

    #[error("trace drift {drift:.3e} exceeds 1e-9")]
    TraceDrift { drift: f64 },

    #[error("step halving changed an entry by {max_change:.3e} (> {tolerance:.1e}) at dt = {dt:.3e}")]
    Convergence { max_change: f64, tolerance: f64, dt: f64 },

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DimensionCap { .. } => "dimension_cap",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::NotCommuting { .. } => "not_commuting",
            Error::InvalidState(_) => "invalid_state",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotTraceless { .. } => "not_traceless",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Positivity { .. } => "positivity",
            Error::TraceDrift { .. } => "trace_drift",
            Error::Convergence { .. } => "convergence",
            Error::Model(_) => "model",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Numerical-contract violations, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Positivity { .. }
                | Error::TraceDrift { .. }
                | Error::Convergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
