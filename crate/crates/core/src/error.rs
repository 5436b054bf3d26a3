use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("spectrum violates conjugate symmetry (deviation {deviation:.3e})")]
    AsymmetricSpectrum { deviation: f64 },

    #[error("singular operator: zero symbol at mode ({kx}, {ky}) with nonzero right-hand side")]
    SingularOperator { kx: usize, ky: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Krylov solve did not converge in {iters} iterations (relative residual {residual:.3e})")]
    KrylovNoConvergence { iters: usize, residual: f64 },

    #[error("Krylov breakdown after {iters} iterations: {reason}")]
    KrylovBreakdown { iters: usize, reason: String },

    #[error("step {step} failed in {stage}: {source}")]
    StepFailure {
        step: u64,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("solution diverged at step {step}: non-finite values in {field}")]
    Diverged { step: u64, field: &'static str },

    #[error("missing history: {0}")]
    MissingHistory(&'static str),

    #[error("nonlinear iteration did not converge in {iters} iterations (residual {residual:.3e})")]
    NonlinearNoConvergence { iters: usize, residual: f64 },

    #[error("snapshot format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{label}: {source}")]
    Run {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
