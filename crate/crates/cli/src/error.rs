use std::fmt;
use std::process::ExitCode;

use nudgelab_core::Error;
use nudgelab_sim::SimError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
    Violations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Violations(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
            CliError::Violations(n) => write!(f, "{n} policy violation(s) found"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_retryable() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Core(inner) => inner.into(),
            SimError::Transport(m) => CliError::Io(m),
            SimError::Api { message, request } => {
                let detail = request
                    .and_then(|r| serde_json::to_string(&r).ok())
                    .map(|r| format!("\noffending request: {r}"))
                    .unwrap_or_default();
                CliError::Validation(format!("{message}{detail}"))
            }
            SimError::Config(m) => CliError::Validation(m),
        }
    }
}

pub fn io_err(context: impl fmt::Display, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}
