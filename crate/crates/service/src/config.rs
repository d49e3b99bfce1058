use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};

use nudgelab_core::engine::PolicyConfig;
use nudgelab_core::{Error, Result};

use crate::api::ServiceOptions;

pub const ENV_BIND: &str = "NUDGELAB_BIND";
pub const ENV_SECRET: &str = "NUDGELAB_SECRET";
pub const ENV_POLICY_FILE: &str = "NUDGELAB_POLICY_FILE";
pub const ENV_DATABASE: &str = "NUDGELAB_DATABASE";

/// Server configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub database: PathBuf,
    pub server_secret: String,
    pub policy_file: Option<PathBuf>,
    pub pbkdf2_iterations: u32,
    pub session_ttl_hours: u32,
    pub v1_only: bool,
    /// Seconds between expiry sweeps of pending pop-ups.
    pub sweep_interval_seconds: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            database: PathBuf::from("nudgelab.db"),
            server_secret: String::new(),
            policy_file: None,
            pbkdf2_iterations: 100_000,
            session_ttl_hours: 24,
            v1_only: false,
            sweep_interval_seconds: 60,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Configuration(format!("service config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&raw).map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))
    }

    /// Applies `NUDGELAB_*` overrides looked up through `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(v) = var(ENV_BIND) {
            self.bind = v;
        }
        if let Some(v) = var(ENV_SECRET) {
            self.server_secret = v;
        }
        if let Some(v) = var(ENV_POLICY_FILE) {
            self.policy_file = Some(v.into());
        }
        if let Some(v) = var(ENV_DATABASE) {
            self.database = v.into();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.server_secret.is_empty() {
            return Err(Error::Configuration(format!(
                "server_secret is empty; set it in the config file or {ENV_SECRET}"
            )));
        }
        if self.session_ttl_hours == 0 {
            return Err(Error::Configuration("session_ttl_hours must be at least 1".into()));
        }
        Ok(())
    }

    pub fn policy(&self) -> Result<PolicyConfig> {
        match &self.policy_file {
            Some(p) => PolicyConfig::from_path(p),
            None => Ok(PolicyConfig::default()),
        }
    }

    pub fn options(&self) -> ServiceOptions {
        ServiceOptions {
            server_secret: self.server_secret.clone(),
            pbkdf2_iterations: self.pbkdf2_iterations,
            session_ttl: Duration::hours(i64::from(self.session_ttl_hours)),
            v1_only: self.v1_only,
        }
    }
}
