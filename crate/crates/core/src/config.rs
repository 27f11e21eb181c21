//! Run configuration: one TOML document, overridable from the environment,
//! validated before any work starts and snapshotted into the run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::seed::streams;
use crate::env::{derive_seed, EpisodeConfig};
use crate::policy::{BuiltinModel, Checkpoint, ModelDims, Normalization, PolicyMode, ScorerBackend, UniformScorer, Vocab};
use crate::text::{Lexicon, SubstitutionError};
use crate::train::{BcConfig, PpoConfig};

/// Prefix of environment variables that override config keys. Path
/// segments are separated by a double underscore, so
/// `TEXTGRID__PPO__LR=1e-3` sets `ppo.lr`.
pub const ENV_PREFIX: &str = "TEXTGRID__";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Substitution(#[from] SubstitutionError),
    #[error("policy: {0}")]
    Policy(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguageConfig {
    /// "en" or "fr".
    pub base: String,
    /// Built-in substitution tables applied after the base language.
    pub tables: Vec<String>,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        Self {
            base: "en".into(),
            tables: Vec::new(),
        }
    }
}

impl LanguageConfig {
    pub fn lexicon(&self) -> Result<Lexicon, ConfigError> {
        let mut lex = match self.base.as_str() {
            "en" => Lexicon::english(),
            "fr" => Lexicon::french(),
            other => return Err(ConfigError::Invalid(format!("unknown language {other:?}"))),
        };
        for t in &self.tables {
            lex = lex.with_table(t)?;
        }
        Ok(lex)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Builtin,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySection {
    pub backend: BackendKind,
    pub mode: PolicyMode,
    pub normalization: Normalization,
    pub dims: ModelDims,
    /// Start from this checkpoint instead of a fresh model.
    pub checkpoint: Option<PathBuf>,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            backend: BackendKind::Builtin,
            mode: PolicyMode::ActionHeads,
            normalization: Normalization::default(),
            dims: ModelDims::default(),
            checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// In-process workers used when no addresses are given.
    pub workers: usize,
    /// Remote worker addresses, `host:port`.
    pub addresses: Vec<String>,
    pub timeout_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            addresses: Vec::new(),
            timeout_secs: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub greedy: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: 1000,
            seeds: vec![1, 2],
            greedy: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub run_dir: PathBuf,
    /// Checkpoint every this many PPO updates (and on exit).
    pub checkpoint_every: u64,
    pub total_steps: u64,
    pub env: EpisodeConfig,
    pub language: LanguageConfig,
    pub policy: PolicySection,
    pub ppo: PpoConfig,
    pub bc: BcConfig,
    pub service: ServiceConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            run_dir: PathBuf::from("runs/default"),
            checkpoint_every: 10,
            total_steps: 1_500_000,
            env: EpisodeConfig::default(),
            language: LanguageConfig::default(),
            policy: PolicySection::default(),
            ppo: PpoConfig::default(),
            bc: BcConfig::default(),
            service: ServiceConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if !entry.is_table() {
            *entry = toml::Value::Table(toml::Table::new());
        }
        table = entry.as_table_mut().expect("just made a table");
    }
    table.insert(last.clone(), value);
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    /// Apply `(key, value)` overrides such as `("TEXTGRID__PPO__LR", "1e-3")`.
    /// Keys without the prefix are ignored.
    pub fn with_overrides<I, K, V>(&self, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut root: toml::Table = toml::Table::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut any = false;
        for (k, v) in vars {
            let Some(rest) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let path: Vec<String> = rest.split("__").map(|s| s.to_ascii_lowercase()).collect();
            if path.iter().any(String::is_empty) {
                return Err(ConfigError::Invalid(format!("malformed override key {}", k.as_ref())));
            }
            set_path(&mut root, &path, parse_scalar(v.as_ref()));
            any = true;
        }
        if !any {
            return Ok(self.clone());
        }
        root.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn with_env_overrides(&self) -> Result<Self, ConfigError> {
        self.with_overrides(std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.env.validate().map_err(ConfigError::Invalid)?;
        self.ppo.validate().map_err(ConfigError::Invalid)?;
        self.bc.validate().map_err(ConfigError::Invalid)?;
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive".into());
        }
        if self.eval.episodes == 0 || self.eval.seeds.is_empty() {
            return bad("eval needs at least one episode and one seed".into());
        }
        if self.service.addresses.is_empty() && self.service.workers == 0 {
            return bad("service needs in-process workers or worker addresses".into());
        }
        if self.service.timeout_secs == 0 {
            return bad("service.timeout_secs must be positive".into());
        }
        if self.policy.backend == BackendKind::Builtin {
            let d = self.policy.dims;
            if d.embed == 0 || d.hidden == 0 || d.pair_buckets == 0 || d.max_prefix == 0 {
                return bad("policy.dims entries must be positive".into());
            }
        }
        self.language.lexicon()?;
        Ok(())
    }

    /// Write the resolved configuration as `config.toml` under the run
    /// directory, creating it if needed.
    pub fn snapshot(&self) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.run_dir)?;
        let path = self.run_dir.join("config.toml");
        std::fs::write(&path, self.to_toml())?;
        Ok(path)
    }

    /// Fresh backend as configured, or the configured checkpoint.
    pub fn build_backend(&self, lexicon: &Lexicon) -> Result<Box<dyn ScorerBackend>, ConfigError> {
        if let Some(path) = &self.policy.checkpoint {
            return Checkpoint::load(path)
                .and_then(Checkpoint::into_backend)
                .map_err(|e| ConfigError::Policy(format!("{}: {e}", path.display())));
        }
        let vocab = Vocab::from_lexicon(lexicon);
        let seed = derive_seed(self.seed, streams::INIT, 0);
        Ok(match (self.policy.backend, self.policy.mode) {
            (BackendKind::Uniform, PolicyMode::TokenScoring) => Box::new(UniformScorer::new(vocab.len())),
            (BackendKind::Uniform, PolicyMode::ActionHeads) => Box::new(UniformScorer::heads(vocab.len())),
            (BackendKind::Builtin, PolicyMode::TokenScoring) => {
                Box::new(BuiltinModel::token_scorer(vocab, self.policy.dims, seed))
            }
            (BackendKind::Builtin, PolicyMode::ActionHeads) => Box::new(BuiltinModel::action_heads(
                vocab,
                self.env.action_space.len(),
                self.policy.dims,
                seed,
            )),
        })
    }
}
