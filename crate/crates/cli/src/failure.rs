use std::fmt;
use std::path::Path;

use notebridge_analytics::{InputError, PairMapError, WilcoxonError};
use notebridge_server::{ConfigError, StoreError};
use notebridge_sim::SimError;

/// A domain error: printed as `error[code]: message`, exit status 1.
#[derive(Debug)]
pub struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new("io_failure", format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::new(e.code(), e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new("invalid_config", e.to_string())
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        let code = match e {
            InputError::Io(_) => "io_failure",
            InputError::Pairs(_) => "pair_conflict",
            _ => "malformed_input",
        };
        Failure::new(code, e.to_string())
    }
}

impl From<PairMapError> for Failure {
    fn from(e: PairMapError) -> Self {
        let code = match e {
            PairMapError::Conflict { .. } => "pair_conflict",
            PairMapError::UnmappedUser { .. } => "unmapped_user",
        };
        Failure::new(code, e.to_string())
    }
}

impl From<WilcoxonError> for Failure {
    fn from(e: WilcoxonError) -> Self {
        Failure::new("malformed_input", e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Store(e) => e.into(),
            SimError::Io(e) => Failure::new("io_failure", e.to_string()),
            e => Failure::new("invalid_scenario", e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new("io_failure", e.to_string())
    }
}
