use std::fmt;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    /// The config does not parse or a value is out of range.
    #[error("invalid config: {0}")]
    Schema(String),
    /// A computation failed; a report carrying the message is still written.
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numeric(_) => 1,
            Self::Schema(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

pub(crate) fn schema(e: impl fmt::Display) -> CliError {
    CliError::Schema(e.to_string())
}

pub(crate) fn numeric(e: impl fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

pub(crate) fn io(context: impl fmt::Display, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}
