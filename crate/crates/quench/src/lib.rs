//! Monte Carlo laboratory around `quench-core`: replicated estimation,
//! resampling locality probes, block-field membership tests, record
//! formats and the `quench` command line.

pub mod cli;
pub mod config;
pub mod estimation;
pub mod locality;
pub mod omega;
pub mod records;
pub mod stats;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] quench_core::Error),
    #[error("{0}")]
    Usage(String),
    /// A verification ran to completion and found violations.
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status: 2 for failed checks, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Check(_) => 2,
            _ => 1,
        }
    }
}
