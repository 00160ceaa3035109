//! Failure classification for the process exit code.

use std::fmt;
use std::io;
use std::path::Path;

use selnmt_core::{DataError, ModelError};

/// What went wrong, graded by whose fault it is: bad invocation, bad
/// inputs, or numerics gone off the rails mid-run.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1: flags or configuration the operator must fix.
    Usage(String),
    /// Exit 2: corpus, vocabulary, or checkpoint content problems.
    Data(String),
    /// Exit 3: non-finite loss or similar numeric breakdown.
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for Failure {}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteLoss { .. } => Failure::Numeric(e.to_string()),
            ModelError::InvalidConfig { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

/// Attaches the file path to an IO error; the bare message rarely says
/// which file was involved.
pub fn io_fail(path: &Path, e: io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}
