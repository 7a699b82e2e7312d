//! Command implementations behind the `spinforge` binary. Each command
//! returns its report as text so it can be tested without a process.

pub mod commands;
pub mod program;

use std::fmt;

/// Validation failures exit with code 2, runtime failures with code 1.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spinforge::Error> for CliError {
    fn from(e: spinforge::Error) -> Self {
        use spinforge::Error::*;
        match e {
            DimensionMismatch(_)
            | InvalidSystem(_)
            | SpinIndex { .. }
            | UnknownGate(_)
            | InvalidGate(_)
            | InvalidParameter(_)
            | Schema(_)
            | Nyquist { .. }
            | NotNormalized(_)
            | NotHermitian(_)
            | BadTrace(_)
            | NegativeEigenvalue(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
