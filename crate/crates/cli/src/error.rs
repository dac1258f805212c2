use std::fmt;
use std::process::ExitCode;

/// Failure of a subcommand, classified for the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing files, malformed inputs.
    Config(String),
    /// A model paired with a subcommand or method that cannot handle it.
    Incompatible(String),
    Core(distlrp::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Incompatible(_) => 3,
            CliError::Core(e) if e.is_incompatibility() => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(distlrp::Error::NonFiniteRelevance(_)) => 4,
            CliError::Core(_) => 2,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Incompatible(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<distlrp::Error> for CliError {
    fn from(e: distlrp::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
