use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("coordinate {0} lies outside [0,1]")]
    OutOfRange(f64),
    #[error("grid depth {0} exceeds the supported maximum of {max}", max = crate::geometry::MAX_DEPTH)]
    DepthTooLarge(u32),
    #[error("grid resolution mismatch: depth {0} vs depth {1}")]
    ResolutionMismatch(u32, u32),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid interval [{0}, {1}]")]
    InvertedInterval(f64, f64),
    #[error("empty target set")]
    EmptyTarget,
    #[error("window index {needed} exceeds K_max = {k_max}")]
    WindowExceedsSchedule { needed: u64, k_max: u64 },
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
