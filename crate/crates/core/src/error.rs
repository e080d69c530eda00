use ndarray_linalg::error::LinalgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A Bogoliubov mode energy fell below the zero-mode threshold, so the
    /// many-body ground state is (numerically) degenerate.
    #[error("zero mode in quadratic form: |energy| = {energy:e} below threshold {threshold:e}")]
    ZeroMode { energy: f64, threshold: f64 },

    #[error("degenerate ground state: gap E1 - E0 = {gap:e}")]
    DegenerateGroundState { gap: f64 },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("linear algebra: {0}")]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Unsupported(_))
    }
}
