//! Completion clients behind the rating pipeline.
//!
//! The rater only needs `complete(prompt) -> completion`. Production use
//! goes through [`HttpCompletionClient`], a minimal text-completion
//! exchange over HTTP. Tests and offline reproduction use
//! [`TranscriptClient`], which replays canned completions keyed by the
//! SHA-256 of the exact prompt, so any drift in prompt rendering surfaces
//! as a loud miss instead of a silent change.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// A text-completion backend.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Hex SHA-256 of a prompt, the transcript lookup key.
pub fn prompt_sha256(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a String");
    }
    hex
}

/// Settings for the HTTP completion endpoint. The credential is read from
/// the named environment variable at request time and never logged.
#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub endpoint: String,
    pub model: String,
    pub credential_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_tokens: u32,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            credential_env: "LLM_API_KEY".to_string(),
            timeout: Duration::from_secs(30),
            max_retries: 2,
            max_tokens: 16,
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Client for a minimal HTTP completion endpoint: POST
/// `{model, prompt, max_tokens}`, receive `{text}`. Server errors and
/// transport failures are retried up to `max_retries` times.
pub struct HttpCompletionClient {
    config: ClientConfig,
    http: reqwest::blocking::Client,
}

impl HttpCompletionClient {
    pub fn new(config: ClientConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Transport {
                run: 0,
                message: e.to_string(),
            })?;
        Ok(Self { config, http })
    }
}

impl LlmClient for HttpCompletionClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let credential = std::env::var(&self.config.credential_env)
            .map_err(|_| Error::MissingCredential(self.config.credential_env.clone()))?;
        let body = CompletionRequest {
            model: &self.config.model,
            prompt,
            max_tokens: self.config.max_tokens,
        };
        let mut last_error = String::from("no attempts made");
        for _ in 0..=self.config.max_retries {
            let sent = self
                .http
                .post(&self.config.endpoint)
                .bearer_auth(&credential)
                .json(&body)
                .send();
            match sent {
                Ok(resp) if resp.status().is_success() => {
                    match resp.json::<CompletionResponse>() {
                        Ok(parsed) => return Ok(parsed.text),
                        Err(e) => last_error = format!("bad response body: {e}"),
                    }
                }
                Ok(resp) if resp.status().is_server_error() => {
                    last_error = format!("server status {}", resp.status());
                }
                // Client errors will not improve on retry.
                Ok(resp) => {
                    return Err(Error::Transport {
                        run: 0,
                        message: format!("status {}", resp.status()),
                    });
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Transport {
            run: 0,
            message: last_error,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TranscriptRecord {
    prompt_sha256: String,
    completion: String,
}

/// Deterministic mock backed by a transcript of `{prompt_sha256,
/// completion}` records. Unknown prompts are an error, not a guess.
#[derive(Debug, Clone, Default)]
pub struct TranscriptClient {
    completions: HashMap<String, String>,
}

impl TranscriptClient {
    /// Load a newline-delimited transcript file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let mut completions = HashMap::new();
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord =
                serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            completions.insert(record.prompt_sha256, record.completion);
        }
        Ok(Self { completions })
    }

    /// Build a transcript directly from `(prompt, completion)` pairs.
    pub fn from_pairs<I, P, C>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (P, C)>,
        P: AsRef<str>,
        C: Into<String>,
    {
        let completions = pairs
            .into_iter()
            .map(|(p, c)| (prompt_sha256(p.as_ref()), c.into()))
            .collect();
        Self { completions }
    }

    pub fn insert(&mut self, prompt: &str, completion: impl Into<String>) {
        self.completions.insert(prompt_sha256(prompt), completion.into());
    }

    pub fn len(&self) -> usize {
        self.completions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completions.is_empty()
    }

    /// Write the transcript, records sorted by hash for stable bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let ordered: BTreeMap<&String, &String> = self.completions.iter().collect();
        let mut out = String::new();
        for (hash, completion) in ordered {
            let record = TranscriptRecord {
                prompt_sha256: hash.clone(),
                completion: completion.clone(),
            };
            out.push_str(&serde_json::to_string(&record).map_err(|e| {
                Error::MalformedRecord {
                    line: 0,
                    message: e.to_string(),
                }
            })?);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

impl LlmClient for TranscriptClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let hash = prompt_sha256(prompt);
        self.completions
            .get(&hash)
            .cloned()
            .ok_or(Error::TranscriptMiss(hash))
    }
}

/// Client that answers every prompt with a fixed completion while recording
/// the pairs it served. Useful for generating transcript fixtures: run the
/// pipeline once against a recorder, then replay via `into_transcript`.
#[derive(Debug, Default)]
pub struct RecordingClient {
    completion: String,
    seen: Mutex<HashMap<String, String>>,
}

impl RecordingClient {
    pub fn constant(completion: &str) -> Self {
        Self {
            completion: completion.to_string(),
            seen: Mutex::new(HashMap::new()),
        }
    }

    /// The transcript of everything completed so far.
    pub fn transcript(&self) -> TranscriptClient {
        TranscriptClient {
            completions: self.seen.lock().expect("recorder lock").clone(),
        }
    }

    pub fn into_transcript(self) -> TranscriptClient {
        TranscriptClient {
            completions: self.seen.into_inner().expect("recorder lock"),
        }
    }
}

impl LlmClient for RecordingClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        self.seen
            .lock()
            .expect("recorder lock")
            .insert(prompt_sha256(prompt), self.completion.clone());
        Ok(self.completion.clone())
    }
}
