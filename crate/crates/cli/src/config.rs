//! Run configuration: one TOML file, optionally overridden by flags.

use std::path::{Path, PathBuf};

use crsbias::augment::Strategy;
use crsbias::corpus::EpisodePolicy;
use crsbias::metrics::{LogBase, DEFAULT_CUTOFFS};
use crsbias::popularity::ThresholdPolicy;
use crsbias::synthgen::HttpChatConfig;
use crsbias::Exec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_log_base")]
    pub log_base: f64,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<usize>,
    #[serde(default)]
    pub episode_policy: EpisodePolicy,
    #[serde(default)]
    pub exec: Exec,
    pub paths: Paths,
    #[serde(default)]
    pub eta_policy: ThresholdPolicy,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub generate: GenerateConfig,
    /// Directory that relative paths resolve against; the config file's own.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub runs: Vec<PathBuf>,
    pub pool: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            strategy: default_strategy(),
            k: default_k(),
            batch_size: default_batch_size(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Offline,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub backend: BackendKind,
    /// A bundled template name (`redial_en`, `tgredial_zh`) or a file path.
    #[serde(default = "default_template")]
    pub template: String,
    /// Items to generate for; all catalog items when absent.
    pub items: Option<Vec<String>>,
    /// Keeps only the first `limit` items in catalog order.
    pub limit: Option<usize>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub http: Option<HttpChatConfig>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::default(),
            template: default_template(),
            items: None,
            limit: None,
            max_attempts: default_attempts(),
            concurrency: default_concurrency(),
            http: None,
        }
    }
}

fn default_log_base() -> f64 {
    std::f64::consts::E
}
fn default_cutoffs() -> Vec<usize> {
    DEFAULT_CUTOFFS.to_vec()
}
fn default_strategy() -> Strategy {
    Strategy::PopNudge
}
fn default_k() -> usize {
    5
}
fn default_batch_size() -> usize {
    32
}
fn default_template() -> String {
    "redial_en".into()
}
fn default_attempts() -> u32 {
    3
}
fn default_concurrency() -> usize {
    4
}

/// Flag values that win over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub strategy: Option<Strategy>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(k) = o.k {
            self.augment.k = k;
        }
        if let Some(s) = o.strategy {
            self.augment.strategy = s;
        }
    }

    pub fn log_base(&self) -> Result<LogBase, CliError> {
        LogBase::new(self.log_base).map_err(|e| CliError::Config(format!("log_base: {e}")))
    }

    pub fn seed(&self, command: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("missing required field `seed` for `{command}`")))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolves a required input path and checks that it exists.
    pub fn input(&self, field: &str, value: Option<&PathBuf>, command: &str) -> Result<PathBuf, CliError> {
        let p = value.ok_or_else(|| {
            CliError::Config(format!("missing required field `paths.{field}` for `{command}`"))
        })?;
        let p = self.resolve(p);
        if !p.is_file() {
            return Err(CliError::Config(format!("paths.{field}: no such file {}", p.display())));
        }
        Ok(p)
    }

    pub fn output_dir(&self, command: &str) -> Result<PathBuf, CliError> {
        let p = self.paths.output_dir.as_ref().ok_or_else(|| {
            CliError::Config(format!("missing required field `paths.output_dir` for `{command}`"))
        })?;
        Ok(self.resolve(p))
    }

    pub fn runs(&self, command: &str) -> Result<Vec<PathBuf>, CliError> {
        if self.paths.runs.is_empty() {
            return Err(CliError::Config(format!("missing required field `paths.runs` for `{command}`")));
        }
        self.paths
            .runs
            .iter()
            .map(|p| self.input("runs", Some(p), command))
            .collect()
    }

    /// TOML echo of the effective config with secret-looking keys masked.
    pub fn redacted_toml(&self) -> String {
        let mut value = toml::Value::try_from(self).unwrap_or(toml::Value::Table(Default::default()));
        redact(&mut value);
        toml::to_string(&value).unwrap_or_default()
    }
}

fn redact(v: &mut toml::Value) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t.iter_mut() {
                let k = k.to_ascii_lowercase();
                if ["token", "secret", "password", "api_key"].iter().any(|s| k.contains(s)) {
                    *v = toml::Value::String("<redacted>".into());
                } else {
                    redact(v);
                }
            }
        }
        toml::Value::Array(a) => a.iter_mut().for_each(redact),
        _ => {}
    }
}
