//! Configuration ingestion, file formats, the parallel sweep engine and the
//! oracle battery behind the `ring-rc` binary. The numerical model itself
//! lives in `ring-rc-core`.

pub mod config;
pub mod error;
pub mod io;
pub mod sweep;
pub mod validate;

pub use error::AppError;
