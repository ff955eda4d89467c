use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("near resonance: detuning {detuning_hz:.3e} Hz from line at {line_nm:.4} nm is inside the {guard_hz:.3e} Hz guard")]
    NearResonance { line_nm: f64, detuning_hz: f64, guard_hz: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("integration failed at t = {t:.6e} s: {message}")]
    Integration { t: f64, message: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("fit failed: {message} (rms residual {rms_residual:.3e}, {iterations} iterations)")]
    Fit { message: String, rms_residual: f64, iterations: usize },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Unsupported(_)
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(std::io::Error::other(e))
    }
}
