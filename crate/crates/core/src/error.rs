use thiserror::Error;

/// Errors raised by library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("support [{lo}, {hi}] is not inside the grid domain (-{half_width}, {half_width})")]
    SupportOutsideGrid { lo: f64, hi: f64, half_width: f64 },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("real zero mode {zero_mode:.3e} exceeds the massless tolerance {tolerance:.3e}")]
    ZeroMode { zero_mode: f64, tolerance: f64 },
    #[error("numerical guard `{guard}` tripped: {detail}")]
    NumericalGuard { guard: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn guard(guard: &'static str, detail: impl Into<String>) -> Error {
    Error::NumericalGuard {
        guard,
        detail: detail.into(),
    }
}
