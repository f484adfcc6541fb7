use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use super::engine::{EngineConfig, DEFAULT_BROADCAST_RATE_HZ};
use crate::arm::{ArmConfig, ArmConfigError};
use crate::latency::DEFAULT_PING_TIMEOUT;
use crate::session::DEFAULT_QUEUE_BOUND;

pub const DEFAULT_PORT: u16 = 9600;

/// Environment variables consulted between the config file and CLI flags.
pub const ENV_LISTEN: &str = "TELEROBOT_LISTEN";
pub const ENV_PORT: &str = "TELEROBOT_PORT";
pub const ENV_ARM: &str = "TELEROBOT_ARM";
pub const ENV_RATE: &str = "TELEROBOT_RATE";
pub const ENV_QUEUE_BOUND: &str = "TELEROBOT_QUEUE_BOUND";
pub const ENV_PING_TIMEOUT_MS: &str = "TELEROBOT_PING_TIMEOUT_MS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed server config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error(transparent)]
    Arm(#[from] ArmConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub listen: IpAddr,
    pub port: u16,
    /// Arm description; the built-in default arm when absent.
    pub arm: Option<PathBuf>,
    pub broadcast_rate_hz: f64,
    pub queue_bound: usize,
    pub ping_timeout: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: IpAddr::from([127, 0, 0, 1]),
            port: DEFAULT_PORT,
            arm: None,
            broadcast_rate_hz: DEFAULT_BROADCAST_RATE_HZ,
            queue_bound: DEFAULT_QUEUE_BOUND,
            ping_timeout: DEFAULT_PING_TIMEOUT,
        }
    }
}

/// Optional values from one configuration layer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub listen: Option<IpAddr>,
    pub port: Option<u16>,
    pub arm: Option<PathBuf>,
    pub rate_hz: Option<f64>,
    pub queue_bound: Option<usize>,
    pub ping_timeout_ms: Option<u64>,
}

impl ConfigLayer {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut layer = Self::from_toml_str(&text)?;
        // relative arm paths are resolved against the config file's directory
        if let (Some(arm), Some(dir)) = (&layer.arm, path.parent()) {
            if arm.is_relative() {
                layer.arm = Some(dir.join(arm));
            }
        }
        Ok(layer)
    }

    /// Reads the `TELEROBOT_*` variables through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parse<T: std::str::FromStr>(key: &'static str, v: Option<String>) -> Result<Option<T>, ConfigError> {
            v.map(|s| {
                s.trim().parse().map_err(|_| ConfigError::Invalid {
                    key,
                    reason: format!("cannot parse {s:?}"),
                })
            })
            .transpose()
        }
        Ok(Self {
            listen: parse(ENV_LISTEN, lookup(ENV_LISTEN))?,
            port: parse(ENV_PORT, lookup(ENV_PORT))?,
            arm: lookup(ENV_ARM).map(PathBuf::from),
            rate_hz: parse(ENV_RATE, lookup(ENV_RATE))?,
            queue_bound: parse(ENV_QUEUE_BOUND, lookup(ENV_QUEUE_BOUND))?,
            ping_timeout_ms: parse(ENV_PING_TIMEOUT_MS, lookup(ENV_PING_TIMEOUT_MS))?,
        })
    }

    fn apply(&self, cfg: &mut ServerConfig) {
        if let Some(v) = self.listen {
            cfg.listen = v;
        }
        if let Some(v) = self.port {
            cfg.port = v;
        }
        if let Some(v) = &self.arm {
            cfg.arm = Some(v.clone());
        }
        if let Some(v) = self.rate_hz {
            cfg.broadcast_rate_hz = v;
        }
        if let Some(v) = self.queue_bound {
            cfg.queue_bound = v;
        }
        if let Some(v) = self.ping_timeout_ms {
            cfg.ping_timeout = Duration::from_millis(v);
        }
    }
}

impl ServerConfig {
    /// Layers defaults, then file, then environment, then flags.
    pub fn resolve(file: Option<&ConfigLayer>, env: &ConfigLayer, flags: &ConfigLayer) -> Result<Self, ConfigError> {
        let mut cfg = ServerConfig::default();
        for layer in file.into_iter().chain([env, flags]) {
            layer.apply(&mut cfg);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::Invalid {
                key: "port",
                reason: "must be in 1..=65535".into(),
            });
        }
        if !(1.0..=100.0).contains(&self.broadcast_rate_hz) {
            return Err(ConfigError::Invalid {
                key: "rate_hz",
                reason: format!("must be in [1, 100], got {}", self.broadcast_rate_hz),
            });
        }
        if self.queue_bound == 0 {
            return Err(ConfigError::Invalid {
                key: "queue_bound",
                reason: "must be at least 1".into(),
            });
        }
        if self.ping_timeout.is_zero() {
            return Err(ConfigError::Invalid {
                key: "ping_timeout_ms",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn load_arm(&self) -> Result<ArmConfig, ConfigError> {
        match &self.arm {
            Some(path) => Ok(ArmConfig::load(path)?),
            None => Ok(ArmConfig::default()),
        }
    }

    pub fn engine_config(&self) -> Result<EngineConfig, ConfigError> {
        Ok(EngineConfig {
            arm: self.load_arm()?,
            broadcast_rate_hz: self.broadcast_rate_hz,
            queue_bound: self.queue_bound,
            ..EngineConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> ConfigLayer {
        let map: HashMap<String, String> =
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        ConfigLayer::from_env(|k| map.get(k).cloned()).unwrap()
    }

    #[test]
    fn defaults() {
        let cfg = ServerConfig::resolve(None, &ConfigLayer::default(), &ConfigLayer::default()).unwrap();
        assert_eq!(cfg.port, 9600);
        assert_eq!(cfg.broadcast_rate_hz, 10.0);
        assert_eq!(cfg.queue_bound, 64);
        assert_eq!(cfg.ping_timeout, Duration::from_secs(2));
    }

    #[test]
    fn precedence_flags_over_env_over_file() {
        let file = ConfigLayer::from_toml_str("port = 1000\nrate_hz = 5.0\nqueue_bound = 8\n").unwrap();
        let env = env(&[(ENV_PORT, "2000"), (ENV_RATE, "20")]);
        let flags = ConfigLayer {
            port: Some(3000),
            ..Default::default()
        };
        let cfg = ServerConfig::resolve(Some(&file), &env, &flags).unwrap();
        assert_eq!(cfg.port, 3000);
        assert_eq!(cfg.broadcast_rate_hz, 20.0);
        assert_eq!(cfg.queue_bound, 8);
    }

    #[test]
    fn rejects_bad_values() {
        let flags = ConfigLayer {
            rate_hz: Some(500.0),
            ..Default::default()
        };
        assert!(ServerConfig::resolve(None, &ConfigLayer::default(), &flags).is_err());
        let flags = ConfigLayer {
            port: Some(0),
            ..Default::default()
        };
        assert!(ServerConfig::resolve(None, &ConfigLayer::default(), &flags).is_err());
        assert!(ConfigLayer::from_env(|k| (k == ENV_PORT).then(|| "abc".to_string())).is_err());
        assert!(ConfigLayer::from_toml_str("colour = 3").is_err());
    }

    #[test]
    fn file_arm_path_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("arm.toml"), ArmConfig::default().to_toml_string()).unwrap();
        let path = dir.path().join("server.toml");
        std::fs::write(&path, "arm = \"arm.toml\"\nport = 9700\n").unwrap();
        let layer = ConfigLayer::from_file(&path).unwrap();
        let cfg = ServerConfig::resolve(Some(&layer), &ConfigLayer::default(), &ConfigLayer::default()).unwrap();
        assert_eq!(cfg.load_arm().unwrap(), ArmConfig::default());
    }

    #[test]
    fn shipped_server_config_parses() {
        let layer = ConfigLayer::from_toml_str(include_str!("../../../../config/server.toml")).unwrap();
        let cfg = ServerConfig::resolve(Some(&layer), &ConfigLayer::default(), &ConfigLayer::default()).unwrap();
        assert_eq!(cfg.port, DEFAULT_PORT);
    }
}
