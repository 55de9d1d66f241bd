use thiserror::Error;

/// Errors produced by the solver, the Monte Carlo harness and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("initial data is not finite in cell {cell} (x = {x})")]
    NonFiniteInitialData { cell: isize, x: f64 },

    #[error("non-finite value at step {step}, cell {cell}")]
    NonFiniteState { step: u64, cell: isize },

    #[error("level step {level_dt} is not an integer multiple of the fine step {dt_fine}")]
    MisalignedLevel { level_dt: f64, dt_fine: f64 },

    #[error("increment window {window} at level {level_dt} lies outside the path")]
    WindowOutOfRange { window: usize, level_dt: f64 },

    #[error("quadrature did not reach tolerance {tol:e}; achieved {achieved:e}")]
    QuadratureNotConverged { tol: f64, achieved: f64 },

    #[error("ensemble needs at least two paths for a standard error, got {0}")]
    EnsembleTooSmall(usize),

    #[error("{aborted} of {total} paths aborted: {first}")]
    StudyFailed {
        aborted: usize,
        total: usize,
        first: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState { .. } | Error::StudyFailed { .. } | Error::QuadratureNotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
