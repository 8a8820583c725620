use alloc::string::String;

/// Errors surfaced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// The operation needs explicit dynamics but the environment only samples.
    #[error("environment is sampling-only; exact dynamics required")]
    CapabilityRequired,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("size cap exceeded: {what} = {value} > {cap}")]
    SizeCap { what: &'static str, value: u64, cap: u64 },
    /// Every candidate was eliminated; the valid function did not survive.
    #[error("surviving set is empty")]
    EmptySurvivorSet,
    #[error("no member is {theta}-valid")]
    EmptyValidSet { theta: f64 },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
