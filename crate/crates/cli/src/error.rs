//! CLI-level errors and their process exit codes.

use std::fmt;
use std::path::Path;

/// Failure classes, each tied to one exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration: exit 1.
    Usage(String),
    /// Unreadable, malformed, or unwritable data: exit 2.
    Data(String),
    /// A required artifact from an earlier stage is absent: exit 3.
    Missing { what: String, stage: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Missing { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Data(msg) => write!(f, "{msg}"),
            CliError::Missing { what, stage } => {
                write!(f, "{what} not found: run `eventscope {stage}` first")
            }
        }
    }
}

impl From<eventscope::Error> for CliError {
    fn from(err: eventscope::Error) -> Self {
        match err {
            // Parameter validation failures are configuration mistakes.
            eventscope::Error::InvalidInput(_) => CliError::Usage(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

/// Exit-3 check that an earlier stage's artifact exists before using it.
pub fn require_artifact(path: &Path, what: &str, stage: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Missing {
            what: format!("{what} ({})", path.display()),
            stage: stage.to_string(),
        })
    }
}
