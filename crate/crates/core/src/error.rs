use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("interference kernel overflowed 128-bit integers at (j={j}, m={m}, n={n})")]
    KernelOverflow { j: u32, m: u32, n: u32 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("outcome (m={m}, n={n}) is unreachable under the given parameters")]
    UnreachableOutcome { m: u32, n: u32 },

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::KernelOverflow { .. } => "kernel_overflow",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Domain(_) => "domain_error",
            Error::Shape(_) => "shape_error",
            Error::InsufficientData(_) => "insufficient_data",
            Error::UnreachableOutcome { .. } => "unreachable_outcome",
            Error::FitFailure(_) => "fit_failure",
            Error::Alignment(_) => "alignment_error",
            Error::Format(_) => "format_error",
        }
    }
}
