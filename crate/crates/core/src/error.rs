use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A non-finite value appeared while time stepping.
    #[error("energies explode: non-finite state at t = {time} (step {step})")]
    Blowup { time: f64, step: u64 },

    #[error("potential does not provide derivatives of order {order} (max {available})")]
    DerivativeOrder { order: usize, available: usize },

    #[error("time {t} outside window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },

    #[error("modulated Fourier construction diverged in window {window}: {detail}")]
    Divergence { window: usize, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures of the numerics itself (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Blowup { .. } | Error::Divergence { .. } | Error::Numerical(_))
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
