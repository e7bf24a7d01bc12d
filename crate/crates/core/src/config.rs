//! Engine and service configuration, read from a TOML file with
//! environment overrides for the port and store path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aligner::LikertBands;
use crate::scheduler::DEFAULT_INTERVALS;
use crate::session::{SessionSettings, PLAY_TIME_CAP_S};

pub const ENV_PORT: &str = "PHONETUTOR_PORT";
pub const ENV_STORE: &str = "PHONETUTOR_STORE";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: String,
    pub port: u16,
    pub store_path: PathBuf,
    /// Curriculum file; the bundled curriculum when absent.
    pub curriculum: Option<PathBuf>,
    /// Directory of reference clips; synthetic references when absent.
    pub references: Option<PathBuf>,
    /// Score temperature; derived from the references when absent.
    pub temperature: Option<f64>,
    /// Word accepted at this fraction of its perfect score.
    pub word_accept_fraction: f64,
    pub likert: LikertBands,
    pub interval_table: Vec<u64>,
    pub session_cap_s: f64,
    /// Seed for default syllabi when a request carries none.
    pub syllabus_seed: u64,
    /// Append delta features to the MFCCs.
    pub deltas: bool,
    /// When set, requests must carry `Authorization: Bearer <token>`.
    pub operator_token: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            store_path: PathBuf::from("phonetutor-store"),
            curriculum: None,
            references: None,
            temperature: None,
            word_accept_fraction: 0.6,
            likert: LikertBands::default(),
            interval_table: DEFAULT_INTERVALS.to_vec(),
            session_cap_s: PLAY_TIME_CAP_S,
            syllabus_seed: 0,
            deltas: false,
            operator_token: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Applies `PHONETUTOR_PORT` and `PHONETUTOR_STORE` from `lookup`.
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(port) = lookup(ENV_PORT) {
            self.port = port
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_PORT}={port:?} is not a port")))?;
        }
        if let Some(store) = lookup(ENV_STORE) {
            self.store_path = PathBuf::from(store);
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.temperature.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
            return bad("temperature must be positive");
        }
        if !(self.word_accept_fraction > 0.0 && self.word_accept_fraction <= 1.0) {
            return bad("word_accept_fraction must be in (0, 1]");
        }
        let l = &self.likert;
        if !(l.pass_sigmas >= 0.0 && l.fail_sigmas >= l.pass_sigmas && l.margin_fraction >= 0.0) {
            return bad("likert bands must satisfy 0 <= pass_sigmas <= fail_sigmas and margin_fraction >= 0");
        }
        if self.interval_table.is_empty() || self.interval_table.contains(&0) {
            return bad("interval_table must be non-empty with positive gaps");
        }
        if !(self.session_cap_s > 0.0) {
            return bad("session_cap_s must be positive");
        }
        Ok(())
    }

    pub fn session_settings(&self) -> SessionSettings {
        SessionSettings {
            time_cap_s: self.session_cap_s,
            interval_table: self.interval_table.clone(),
        }
    }
}
