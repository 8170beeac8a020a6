//! Service configuration: a versioned `key = value` file plus environment overrides.
//!
//! ```text
//! format = objrestore-service-config
//! version = 1
//! server.host = 127.0.0.1
//! server.port = 8080
//! limits.upload_bytes = 33554432
//! segment.external_url = http://127.0.0.1:9000/segment
//! segment.external_timeout_ms = 10000
//! storage.dir = sessions
//! preview.factors = 0.5,1.0,1.5
//! preview.max_dim = 512
//! ```
//!
//! Every key is optional. Environment variables win over the file:
//! `OBJRESTORE_HOST`, `OBJRESTORE_PORT`, `OBJRESTORE_UPLOAD_LIMIT`,
//! `OBJRESTORE_EXTERNAL_URL`, `OBJRESTORE_EXTERNAL_TIMEOUT_MS`,
//! `OBJRESTORE_STORAGE_DIR`.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use objrestore::kv::KvDocument;
use objrestore::segment::{ExternalSegmenter, DEFAULT_EXTERNAL_TIMEOUT};
use objrestore::{Error, Result};

pub const CONFIG_FORMAT: &str = "objrestore-service-config";
pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_UPLOAD_LIMIT: usize = 32 << 20;
pub const DEFAULT_PREVIEW_FACTORS: [f64; 3] = [0.5, 1.0, 1.5];
pub const DEFAULT_PREVIEW_MAX_DIM: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub host: IpAddr,
    pub port: u16,
    pub upload_limit: usize,
    pub external_url: Option<String>,
    pub external_timeout: Duration,
    /// Write-through persistence root; sessions live in memory only when unset.
    pub storage_dir: Option<PathBuf>,
    pub preview_factors: Vec<f64>,
    pub preview_max_dim: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            external_url: None,
            external_timeout: DEFAULT_EXTERNAL_TIMEOUT,
            storage_dir: None,
            preview_factors: DEFAULT_PREVIEW_FACTORS.to_vec(),
            preview_max_dim: DEFAULT_PREVIEW_MAX_DIM,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("config {key}: cannot parse {v:?}")))
}

impl Config {
    pub fn bind_addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }

    pub fn external(&self) -> Option<ExternalSegmenter> {
        self.external_url
            .as_ref()
            .map(|u| ExternalSegmenter::new(u.clone()).with_timeout(self.external_timeout))
    }

    /// Parses a config file body; keys not present keep their defaults.
    pub fn from_text(text: &str) -> Result<Config> {
        let doc = KvDocument::parse_versioned(text, CONFIG_FORMAT, CONFIG_VERSION)?;
        let mut c = Config::default();
        for (key, value) in doc.keys_with_prefix("") {
            if key != "format" && key != "version" {
                c.set(key, value)?;
            }
        }
        Ok(c)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "server.host" => self.host = parse_value(key, value)?,
            "server.port" => self.port = parse_value(key, value)?,
            "limits.upload_bytes" => self.upload_limit = parse_value(key, value)?,
            "segment.external_url" => {
                self.external_url = Some(value.trim().to_string()).filter(|v| !v.is_empty());
            }
            "segment.external_timeout_ms" => {
                self.external_timeout = Duration::from_millis(parse_value(key, value)?);
            }
            "storage.dir" => {
                self.storage_dir =
                    Some(PathBuf::from(value.trim())).filter(|p| !p.as_os_str().is_empty())
            }
            "preview.factors" => {
                let factors = value
                    .split(',')
                    .map(|f| parse_value::<f64>(key, f))
                    .collect::<Result<Vec<_>>>()?;
                if factors.is_empty() || factors.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
                    return Err(Error::InvalidArgument(
                        "preview.factors must be non-negative".into(),
                    ));
                }
                self.preview_factors = factors;
            }
            "preview.max_dim" => self.preview_max_dim = parse_value(key, value)?,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies `OBJRESTORE_*` overrides read through `env`.
    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<()> {
        for (var, key) in [
            ("OBJRESTORE_HOST", "server.host"),
            ("OBJRESTORE_PORT", "server.port"),
            ("OBJRESTORE_UPLOAD_LIMIT", "limits.upload_bytes"),
            ("OBJRESTORE_EXTERNAL_URL", "segment.external_url"),
            (
                "OBJRESTORE_EXTERNAL_TIMEOUT_MS",
                "segment.external_timeout_ms",
            ),
            ("OBJRESTORE_STORAGE_DIR", "storage.dir"),
        ] {
            if let Some(v) = env(var) {
                self.set(key, &v)?;
            }
        }
        Ok(())
    }

    /// File (when given) then process environment.
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let mut c = match path {
            Some(p) => Config::from_text(&std::fs::read_to_string(p)?)?,
            None => Config::default(),
        };
        c.apply_env(|k| std::env::var(k).ok())?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_bind_loopback() {
        let c = Config::default();
        assert!(c.bind_addr().ip().is_loopback());
        assert_eq!(c.upload_limit, 32 * 1024 * 1024);
        assert_eq!(c.external_timeout, Duration::from_secs(10));
        assert!(c.external().is_none());
    }

    #[test]
    fn file_then_env() {
        let text = "format = objrestore-service-config\nversion = 1\nserver.port = 9001\npreview.factors = 0.25, 1\nsegment.external_url = http://x/seg\n";
        let mut c = Config::from_text(text).unwrap();
        assert_eq!(c.port, 9001);
        assert_eq!(c.preview_factors, vec![0.25, 1.0]);
        c.apply_env(|k| match k {
            "OBJRESTORE_PORT" => Some("7000".into()),
            "OBJRESTORE_UPLOAD_LIMIT" => Some("1024".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!((c.port, c.upload_limit), (7000, 1024));
        assert_eq!(c.external().unwrap().endpoint, "http://x/seg");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::from_text(
            "format = objrestore-service-config\nversion = 1\nserver.prot = 1\n"
        )
        .is_err());
        assert!(Config::from_text(
            "format = objrestore-service-config\nversion = 1\nserver.port = big\n"
        )
        .is_err());
        assert!(Config::from_text("format = other\nversion = 1\n").is_err());
    }
}
