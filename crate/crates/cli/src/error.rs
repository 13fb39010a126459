use std::fmt;
use std::path::Path;

use serde::Serialize;

pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Failure of a command. Usage errors (bad flags, bad config, unreadable
/// inputs) exit with 2, failures of the computation itself with 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: "usage".into(), message: message.into(), exit_code: EXIT_USAGE }
    }

    pub fn domain(kind: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), message: message.into(), exit_code: EXIT_DOMAIN }
    }

    pub fn missing_input(path: &Path) -> Self {
        Self {
            kind: "missing_input".into(),
            message: format!("input file not found: {}", path.display()),
            exit_code: EXIT_USAGE,
        }
    }

    /// Error raised while reading a user-supplied input: always a usage error.
    pub fn input(path: &Path, e: sicspin::Error) -> Self {
        Self {
            kind: e.kind().into(),
            message: format!("{}: {e}", path.display()),
            exit_code: EXIT_USAGE,
        }
    }

    /// `{"error": {"kind": ..., "message": ..., "exit_code": ...}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<sicspin::Error> for CliError {
    fn from(e: sicspin::Error) -> Self {
        let exit_code = match e {
            sicspin::Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        };
        Self { kind: e.kind().into(), message: e.to_string(), exit_code }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
