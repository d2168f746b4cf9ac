//! Configuration-driven driver around `convexvi-core`: builds a Bermudan put
//! instance, runs the lower and upper schemes, writes result tables and runs
//! the verification checks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod solve;
pub mod verify;

use config::ConfigError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Core(#[from] convexvi_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} did not converge within max_iter")]
    NotConverged(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::NotConverged(_) => EXIT_NOT_CONVERGED,
            RunError::VerifyFailed(_) => EXIT_VERIFY_FAILED,
            RunError::Core(_) => EXIT_CONFIG,
            RunError::Io(_) | RunError::Csv(_) => 1,
        }
    }
}
