//! Error type shared by the simulation core.

use alloc::string::String;
use core::fmt;

/// Failure modes surfaced by the simulation core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A state variable left the representable range (NaN or infinity).
    /// Carries the simulation time of the failing step; usually signals a
    /// step size too large for the configured dynamics.
    NonFinite { t_s: f64 },
    /// Encoded chip power would be non-positive; the bias must dominate the
    /// masked input product.
    BiasTooSmall,
    /// Inconsistent configuration (grids that do not divide, mismatched
    /// sample spacing, invalid parameter values).
    ConfigMismatch(String),
    /// The task recurrence left its stable range at the given sample index.
    Diverged { index: usize },
    /// A requested split does not fit the dataset.
    OutOfRange,
    /// Normal equations are numerically singular; raise the ridge parameter.
    SingularSystem,
    /// Matrix/vector dimensions do not agree.
    ShapeMismatch,
    /// Target series has zero variance; the error normalization is undefined.
    ConstantTarget,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite { t_s } => {
                write!(f, "non-finite state at t = {t_s:.6e} s (step size too large?)")
            }
            Error::BiasTooSmall => write!(f, "encoded chip power not positive; increase bias"),
            Error::ConfigMismatch(msg) => write!(f, "configuration mismatch: {msg}"),
            Error::Diverged { index } => write!(f, "task series diverged at index {index}"),
            Error::OutOfRange => write!(f, "split exceeds dataset length"),
            Error::SingularSystem => write!(f, "normal equations singular; raise lambda"),
            Error::ShapeMismatch => write!(f, "dimension mismatch"),
            Error::ConstantTarget => write!(f, "target has zero variance"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
