use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use fer_core::pipeline::{EngagementConfig, DEFAULT_TAU};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Environment variable naming the config file; takes precedence over any
/// path given on the command line.
pub const CONFIG_ENV: &str = "FER_CONFIG";

/// Service settings, read from TOML. Relative paths are resolved against the
/// directory containing the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Trained weights; not needed in fixture mode.
    pub weights: Option<PathBuf>,
    pub cascade: PathBuf,
    pub sessions_dir: PathBuf,
    /// Web UI build output served at `/`, if present.
    pub static_dir: Option<PathBuf>,
    /// Serve a seeded, untrained model instead of loading weights.
    pub fixture_mode: bool,
    pub tau: f32,
    pub engagement: EngagementConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            weights: None,
            cascade: PathBuf::from("fixtures/cascades/haarcascade_frontalface_default.xml"),
            sessions_dir: PathBuf::from("sessions"),
            static_dir: None,
            fixture_mode: false,
            tau: DEFAULT_TAU,
            engagement: EngagementConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ServiceError> {
        let mut cfg: ServiceConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// `FER_CONFIG` if set, else `cli`.
    pub fn locate(cli: Option<&Path>) -> Option<PathBuf> {
        std::env::var_os(CONFIG_ENV)
            .map(PathBuf::from)
            .or_else(|| cli.map(Path::to_path_buf))
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.cascade);
        join(&mut self.sessions_dir);
        if let Some(p) = &mut self.weights {
            join(p);
        }
        if let Some(p) = &mut self.static_dir {
            join(p);
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ServiceError::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if !self.fixture_mode && self.weights.is_none() {
            return Err(ServiceError::Config("weights path required unless fixture_mode is set".into()));
        }
        self.engagement
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))
    }
}
