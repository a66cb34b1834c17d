//! Service settings read from the environment.

use std::path::PathBuf;
use std::time::Duration;

use chrono_tz::Tz;
use thiserror::Error;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_ZONE: Tz = chrono_tz::Asia::Kolkata;
pub const SESSION_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown time zone {0:?}")]
    Zone(String),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind_addr: String,
    /// Bearer token for `/admin`. With no token every admin call is refused.
    pub admin_token: Option<String>,
    pub data_dir: PathBuf,
    pub ui_dir: PathBuf,
    pub session_ttl: Duration,
    /// Zone used to bin the hourly report.
    pub zone: Tz,
}

fn var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl ServerConfig {
    /// Defaults with everything persisted under `data_dir`.
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            bind_addr: DEFAULT_BIND.into(),
            admin_token: None,
            data_dir: data_dir.into(),
            ui_dir: PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/ui")),
            session_ttl: SESSION_TTL,
            zone: DEFAULT_ZONE,
        }
    }

    /// Reads `BIND_ADDR`, `ADMIN_TOKEN`, `DATA_DIR`, `UI_DIR` and `REPORT_ZONE`.
    pub fn from_env() -> Result<Self, ConfigError> {
        let mut cfg = ServerConfig::new(var("DATA_DIR").unwrap_or_else(|| "data".into()));
        if let Some(b) = var("BIND_ADDR") {
            cfg.bind_addr = b;
        }
        cfg.admin_token = var("ADMIN_TOKEN");
        if let Some(u) = var("UI_DIR") {
            cfg.ui_dir = u.into();
        }
        if let Some(z) = var("REPORT_ZONE") {
            cfg.zone = z.parse().map_err(|_| ConfigError::Zone(z))?;
        }
        Ok(cfg)
    }
}
