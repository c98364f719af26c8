//! `RunConfig`: TOML file plus `VIGIL_` environment overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use vigil_core::pipeline::{SamplingStrategy, TransformConfig};
use vigil_service::notify::RetryPolicy;

pub const ENV_PREFIX: &str = "VIGIL_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub window_s: f64,
    pub sampling: SamplingStrategy,
    pub transform: TransformConfig,
    pub classifier: ClassifierConfig,
    pub store_root: PathBuf,
    pub database: PathBuf,
    pub notifications: NotifyConfig,
    pub bind: String,
    pub api_token: Option<String>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window_s: vigil_core::ingest::DEFAULT_WINDOW_S,
            sampling: SamplingStrategy::parse("8x32x1").expect("valid constant strategy"),
            transform: TransformConfig::test(),
            classifier: ClassifierConfig::default(),
            store_root: PathBuf::from("vigil-data/chunks"),
            database: PathBuf::from("vigil-data/vigil.db"),
            notifications: NotifyConfig::default(),
            bind: "127.0.0.1:8080".into(),
            api_token: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Stub,
    Toy,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    /// Model server base URL, for `remote`.
    pub endpoint: Option<String>,
    pub timeout_s: f64,
    pub retries: u32,
    /// Trained weights, for `toy`.
    pub model_path: Option<PathBuf>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { kind: ClassifierKind::Stub, endpoint: None, timeout_s: 5.0, retries: 0, model_path: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SinkKind {
    Log,
    Webhook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NotifyConfig {
    pub sink: SinkKind,
    pub url: Option<String>,
    pub max_attempts: u32,
    pub initial_backoff_s: f64,
    pub timeout_s: f64,
}

impl Default for NotifyConfig {
    fn default() -> Self {
        NotifyConfig { sink: SinkKind::Log, url: None, max_attempts: 3, initial_backoff_s: 1.0, timeout_s: 5.0 }
    }
}

impl NotifyConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy { max_attempts: self.max_attempts, initial_backoff: Duration::from_secs_f64(self.initial_backoff_s) }
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        positive("window_s", self.window_s)?;
        self.sampling.validate().map_err(|e| e.to_string())?;
        self.transform.validate().map_err(|e| e.to_string())?;
        positive("classifier.timeout_s", self.classifier.timeout_s)?;
        match self.classifier.kind {
            ClassifierKind::Remote if self.classifier.endpoint.is_none() => {
                return Err("classifier.endpoint is required for the remote classifier".into())
            }
            ClassifierKind::Toy if self.classifier.model_path.is_none() => {
                return Err("classifier.model_path is required for the toy classifier".into())
            }
            _ => {}
        }
        if self.notifications.sink == SinkKind::Webhook && self.notifications.url.is_none() {
            return Err("notifications.url is required for the webhook sink".into());
        }
        if self.notifications.max_attempts == 0 {
            return Err("notifications.max_attempts must be at least 1".into());
        }
        positive("notifications.timeout_s", self.notifications.timeout_s)?;
        if !(self.notifications.initial_backoff_s.is_finite() && self.notifications.initial_backoff_s >= 0.0) {
            return Err("notifications.initial_backoff_s must be non-negative".into());
        }
        if self.api_token.as_deref() == Some("") {
            return Err("api_token must not be empty".into());
        }
        Ok(())
    }

    /// Reads `path` (if any), applies overrides from `env` and validates.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<RunConfig, String>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                text.parse::<toml::Table>().map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => toml::Table::new(),
        };
        apply_env(&mut table, env)?;
        let cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| format!("config: {}", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `VIGIL_WINDOW_S=5` sets `window_s`; a double underscore descends into a
/// table, so `VIGIL_CLASSIFIER__KIND=remote` sets `classifier.kind`. Values
/// are read as TOML when they parse, as strings otherwise.
pub fn apply_env<I>(table: &mut toml::Table, env: I) -> Result<(), String>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_ascii_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(format!("malformed override {key}"));
        }
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw));
        let (last, parents) = path.split_last().expect("non-empty");
        let mut cur = &mut *table;
        for p in parents {
            cur = cur
                .entry(p.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| format!("{key}: {p} is not a table"))?;
        }
        cur.insert(last.clone(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::load(None, Vec::new()).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn file_and_env_layers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vigil.toml");
        std::fs::write(&path, "window_s = 5\nsampling = \"8x-x1\"\n[classifier]\nkind = \"remote\"\nendpoint = \"http://m\"\n")
            .unwrap();
        let cfg = RunConfig::load(
            Some(&path),
            env(&[("VIGIL_WINDOW_S", "2.5"), ("VIGIL_CLASSIFIER__RETRIES", "2"), ("HOME", "/x")]),
        )
        .unwrap();
        assert_eq!(cfg.window_s, 2.5);
        assert_eq!(cfg.sampling.to_string(), "8x-x1");
        assert_eq!((cfg.classifier.kind, cfg.classifier.retries), (ClassifierKind::Remote, 2));
        let cfg = RunConfig::load(None, env(&[("VIGIL_API_TOKEN", "abc def"), ("VIGIL_STORE_ROOT", "/tmp/s")])).unwrap();
        assert_eq!(cfg.api_token.as_deref(), Some("abc def"));
        assert_eq!(cfg.store_root, PathBuf::from("/tmp/s"));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        for e in [
            env(&[("VIGIL_WINDOWS", "5")]),
            env(&[("VIGIL_CLASSIFIER__COLOUR", "red")]),
            env(&[("VIGIL_WINDOW_S", "0")]),
            env(&[("VIGIL_SAMPLING", "8x0x1")]),
            env(&[("VIGIL_CLASSIFIER__KIND", "remote")]),
            env(&[("VIGIL_NOTIFICATIONS__SINK", "webhook")]),
            env(&[("VIGIL_TRANSFORM__FLIP_PROBABILITY", "1.5")]),
        ] {
            assert!(RunConfig::load(None, e.clone()).is_err(), "{e:?}");
        }
    }
}
