use std::fmt;

use robust_snell::Error;

/// A failed command: machine-readable code, process exit status and message.
#[derive(Debug)]
pub struct Failure {
    pub code: &'static str,
    pub exit: u8,
    pub message: String,
}

impl Failure {
    pub fn load(message: impl Into<String>) -> Self {
        Self {
            code: "E_LOAD",
            exit: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: "E_INTERNAL",
            exit: 5,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, exit) = match &e {
            Error::Io { .. }
            | Error::Parse(_)
            | Error::WrongKind { .. }
            | Error::Invariant { .. }
            | Error::UnknownNode(_)
            | Error::InvalidInput(_) => ("E_LOAD", 2),
            Error::CapExceeded { .. } => ("E_CAP", 3),
            Error::Numerical(_) | Error::NonSymmetric(_) => ("E_NUMERIC", 3),
            Error::Arbitrage { .. } => ("E_ARBITRAGE", 4),
        };
        Self {
            code,
            exit,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::load(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}
