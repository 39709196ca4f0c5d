use std::path::PathBuf;

use thiserror::Error;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_UPLOAD: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderKind {
    Stub,
    /// Replays a script file; see `ScriptedProvider::from_file`.
    Scripted { script: PathBuf },
    Remote { endpoint: String, key: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub port: u16,
    pub provider: ProviderKind,
    /// Remote embedding endpoint; the stub embedder is used when unset.
    pub embed_endpoint: Option<String>,
    pub corpus: Vec<PathBuf>,
    pub data_dir: PathBuf,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    pub max_upload_bytes: usize,
    /// Directory of static UI assets served under `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{key}: invalid value `{value}`")]
    Invalid { key: &'static str, value: String },
    #[error("LITNAV_PROVIDER=remote requires LITNAV_PROVIDER_ENDPOINT")]
    MissingEndpoint,
    #[error("LITNAV_PROVIDER=scripted requires LITNAV_SCRIPT")]
    MissingScript,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: DEFAULT_PORT,
            provider: ProviderKind::Stub,
            embed_endpoint: None,
            corpus: Vec::new(),
            data_dir: PathBuf::from("litnav-data"),
            cors_origins: Vec::new(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            static_dir: None,
        }
    }
}

fn list(value: Option<String>) -> Vec<String> {
    value
        .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default()
}

impl ServiceConfig {
    pub fn from_env() -> Result<ServiceConfig, ConfigError> {
        ServiceConfig::from_lookup(|key| std::env::var(key).ok())
    }

    /// Reads `LITNAV_*` keys through `get`. Empty values count as unset.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<ServiceConfig, ConfigError> {
        let get = |key: &str| get(key).filter(|v| !v.trim().is_empty());
        let mut config = ServiceConfig::default();
        if let Some(port) = get("LITNAV_PORT") {
            config.port = port.trim().parse().map_err(|_| ConfigError::Invalid { key: "LITNAV_PORT", value: port })?;
        }
        config.provider = match get("LITNAV_PROVIDER").as_deref().map(str::trim) {
            None | Some("stub") => ProviderKind::Stub,
            Some("scripted") => {
                ProviderKind::Scripted { script: get("LITNAV_SCRIPT").ok_or(ConfigError::MissingScript)?.into() }
            }
            Some("remote") => ProviderKind::Remote {
                endpoint: get("LITNAV_PROVIDER_ENDPOINT").ok_or(ConfigError::MissingEndpoint)?,
                key: get("LITNAV_PROVIDER_KEY"),
            },
            Some(other) => return Err(ConfigError::Invalid { key: "LITNAV_PROVIDER", value: other.into() }),
        };
        config.embed_endpoint = get("LITNAV_EMBED_ENDPOINT");
        config.corpus = list(get("LITNAV_CORPUS")).into_iter().map(PathBuf::from).collect();
        if let Some(dir) = get("LITNAV_DATA_DIR") {
            config.data_dir = dir.into();
        }
        config.cors_origins = list(get("LITNAV_CORS_ORIGINS"));
        if let Some(cap) = get("LITNAV_MAX_UPLOAD") {
            config.max_upload_bytes =
                cap.trim().parse().map_err(|_| ConfigError::Invalid { key: "LITNAV_MAX_UPLOAD", value: cap })?;
        }
        config.static_dir = get("LITNAV_STATIC_DIR").map(PathBuf::from);
        Ok(config)
    }

    pub fn provider_key(&self) -> Option<&str> {
        match &self.provider {
            ProviderKind::Remote { key, .. } => key.as_deref(),
            _ => None,
        }
    }
}
