use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::storage::Durability;
use crate::sync::SyncConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid value for {var}: {value:?}")]
    Env { var: &'static str, value: String },
}

/// Server settings. Loaded from a TOML file, then overridden by
/// `NOTEBRIDGE_*` environment variables.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub addr: String,
    pub data_dir: PathBuf,
    pub snapshot_every: u64,
    pub replay_limit: u64,
    pub heartbeat_ms: u64,
    pub idle_timeout_ms: u64,
    /// fsync every append instead of only flushing it.
    pub fsync: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        let sync = SyncConfig::default();
        ServerConfig {
            addr: "127.0.0.1:7878".into(),
            data_dir: PathBuf::from("notebridge-data"),
            snapshot_every: sync.snapshot_every,
            replay_limit: sync.replay_limit,
            heartbeat_ms: 15_000,
            idle_timeout_ms: sync.idle_timeout_ms,
            fsync: true,
        }
    }
}

impl ServerConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    /// Reads `path` if given (defaults otherwise) and applies the environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get("NOTEBRIDGE_ADDR") {
            self.addr = v;
        }
        if let Some(v) = get("NOTEBRIDGE_DATA_DIR") {
            self.data_dir = v.into();
        }
        parse_env(&get, "NOTEBRIDGE_SNAPSHOT_EVERY", &mut self.snapshot_every)?;
        parse_env(&get, "NOTEBRIDGE_HEARTBEAT_MS", &mut self.heartbeat_ms)?;
        parse_env(&get, "NOTEBRIDGE_IDLE_TIMEOUT_MS", &mut self.idle_timeout_ms)?;
        parse_env(&get, "NOTEBRIDGE_FSYNC", &mut self.fsync)?;
        Ok(())
    }

    pub fn sync(&self) -> SyncConfig {
        SyncConfig {
            snapshot_every: self.snapshot_every,
            replay_limit: self.replay_limit,
            idle_timeout_ms: self.idle_timeout_ms,
        }
    }

    pub fn durability(&self) -> Durability {
        if self.fsync {
            Durability::Sync
        } else {
            Durability::Flush
        }
    }
}

fn parse_env<T: std::str::FromStr>(
    get: &impl Fn(&str) -> Option<String>,
    var: &'static str,
    slot: &mut T,
) -> Result<(), ConfigError> {
    if let Some(value) = get(var) {
        *slot = value.trim().parse().map_err(|_| ConfigError::Env { var, value })?;
    }
    Ok(())
}
