//! Run configuration shared by the CLI subcommands.
//!
//! Every setting can come from a flat `key=value` config file and be
//! overridden by a command-line flag. The effective configuration is echoed
//! at startup so seeded runs are self-describing. Only the *name* of the
//! credential environment variable is ever stored or echoed.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::llm::ClientConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub seed: u64,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// HTTP completion endpoint; absent means the transcript mock is
    /// required for LLM commands.
    pub endpoint: Option<String>,
    pub model_name: String,
    pub credential_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub parallelism: usize,
    /// Rating runs per text.
    pub k: usize,
    /// Few-shot exemplars per prompt; 0 is the zero-shot variant.
    pub n_exemplars: usize,
    pub transcript: Option<PathBuf>,
    pub bind: String,
    pub n_tune: usize,
    pub bootstrap_resamples: usize,
    pub max_batch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            seed: 42,
            model: None,
            output: None,
            endpoint: None,
            model_name: String::new(),
            credential_env: "LLM_API_KEY".to_string(),
            timeout_secs: 30,
            max_retries: 2,
            parallelism: 1,
            k: 3,
            n_exemplars: 64,
            transcript: None,
            bind: "127.0.0.1:8080".to_string(),
            n_tune: 100,
            bootstrap_resamples: 10_000,
            max_batch: 256,
        }
    }
}

impl RunConfig {
    /// Apply a config file on top of the current values. Lines are
    /// `key=value`; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let content = std::fs::read_to_string(path)?;
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::MalformedConfig {
                line: idx + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|message| Error::MalformedConfig {
                    line: idx + 1,
                    message,
                })?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| format!("{key}: {e}"))
        }

        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "model" => self.model = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "endpoint" => self.endpoint = Some(value.to_string()),
            "model-name" => self.model_name = value.to_string(),
            "credential-env" => self.credential_env = value.to_string(),
            "timeout-secs" => self.timeout_secs = parse(key, value)?,
            "max-retries" => self.max_retries = parse(key, value)?,
            "parallelism" => self.parallelism = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "n-exemplars" => self.n_exemplars = parse(key, value)?,
            "transcript" => self.transcript = Some(PathBuf::from(value)),
            "bind" => self.bind = value.to_string(),
            "n-tune" => self.n_tune = parse(key, value)?,
            "bootstrap-resamples" => self.bootstrap_resamples = parse(key, value)?,
            "max-batch" => self.max_batch = parse(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// The effective configuration as `key=value` lines, mirroring the
    /// config file format.
    pub fn echo(&self) -> String {
        let mut lines = Vec::new();
        if let Some(p) = &self.dataset {
            lines.push(format!("dataset={}", p.display()));
        }
        lines.push(format!("seed={}", self.seed));
        if let Some(p) = &self.model {
            lines.push(format!("model={}", p.display()));
        }
        if let Some(p) = &self.output {
            lines.push(format!("output={}", p.display()));
        }
        if let Some(e) = &self.endpoint {
            lines.push(format!("endpoint={e}"));
        }
        if !self.model_name.is_empty() {
            lines.push(format!("model-name={}", self.model_name));
        }
        lines.push(format!("credential-env={}", self.credential_env));
        lines.push(format!("timeout-secs={}", self.timeout_secs));
        lines.push(format!("max-retries={}", self.max_retries));
        lines.push(format!("parallelism={}", self.parallelism));
        lines.push(format!("k={}", self.k));
        lines.push(format!("n-exemplars={}", self.n_exemplars));
        if let Some(p) = &self.transcript {
            lines.push(format!("transcript={}", p.display()));
        }
        lines.push(format!("bind={}", self.bind));
        lines.push(format!("n-tune={}", self.n_tune));
        lines.push(format!("bootstrap-resamples={}", self.bootstrap_resamples));
        lines.push(format!("max-batch={}", self.max_batch));
        lines.join("\n")
    }

    /// Client settings for the HTTP completion endpoint.
    pub fn client_config(&self) -> ClientConfig {
        ClientConfig {
            endpoint: self.endpoint.clone().unwrap_or_default(),
            model: self.model_name.clone(),
            credential_env: self.credential_env.clone(),
            timeout: Duration::from_secs(self.timeout_secs),
            max_retries: self.max_retries,
            max_tokens: 16,
        }
    }
}
