//! Error classification driving the process exit codes.

use ring_rc_core::Error as CoreError;

/// Exit codes: 0 success, 2 configuration, 3 numerical, 4 partial sweep
/// failure.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    PartialSweep(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::PartialSweep(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> AppError {
        AppError::Config(msg.into())
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> AppError {
        match e {
            CoreError::NonFinite { .. } | CoreError::Diverged { .. } | CoreError::SingularSystem => {
                AppError::Numerical(e.to_string())
            }
            _ => AppError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> AppError {
        AppError::Config(e.to_string())
    }
}
