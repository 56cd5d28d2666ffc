//! Command layer of the `gridshift` binary: configuration, the pipeline
//! stages and the run manifest. All numerical work lives in the core and
//! simgrid crates.

pub mod commands;
pub mod config;
pub mod manifest;

use std::fmt;

use gridshift_core::Error as CoreError;
use gridshift_simgrid::SimError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_ESTIMATION: u8 = 4;

/// A failed command: the process exit code and a one-line message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn estimation(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_ESTIMATION,
            message: message.into(),
        }
    }

    /// Classify a core error raised while reading or aggregating data.
    pub fn from_ingest(e: CoreError) -> Failure {
        Failure::data(e.to_string())
    }

    /// Classify a core error raised while estimating.
    pub fn from_estimation(e: CoreError) -> Failure {
        match e {
            CoreError::Io(_) | CoreError::Json(_) | CoreError::Parse { .. } | CoreError::Integrity(_) => {
                Failure::data(e.to_string())
            }
            _ => Failure::estimation(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Failure {
        match e {
            SimError::Argument(_) => Failure::config(format!("simulate: {e}")),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::data(format!("i/o: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}
