//! Few-shot LLM difficulty rating.
//!
//! A rating run samples exemplars from the training split, renders one of
//! two fixed prompt templates (single words and multi-word phrases get
//! different prompts), sends it through a pluggable completion client, and
//! parses the first number out of the reply. Reruns with freshly sampled
//! exemplars are averaged into the final score. Batch labeling streams the
//! results to a corpus file for distillation-style training sets.
//!
//! All sampling derives from `(base seed, run index, text id)`, so rating is
//! reproducible no matter how runs are scheduled.

pub mod client;

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::features::tokenize;
use crate::seeding;
use crate::{clamp_score, Error, Result};

pub use client::{ClientConfig, HttpCompletionClient, LlmClient, TranscriptClient};

/// Which prompt template a text is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    /// Single-token texts.
    Word,
    /// Everything else.
    Phrase,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Word => "word",
            PromptKind::Phrase => "phrase",
        }
    }
}

/// One labeled exemplar embedded in a few-shot prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub text: String,
    pub label: f64,
}

/// A fully rendered prompt plus the sampling that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub rendered: String,
    pub exemplars: Vec<FewShotExample>,
    pub seed: u64,
}

/// The outcome of rating one text.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingResult {
    /// Mean of the per-run parsed scores.
    pub score: f64,
    /// Parsed score of each successful run.
    pub samples: Vec<f64>,
    pub prompt_kind: PromptKind,
    /// Runs whose completion stayed unparseable after one retry.
    pub failures: usize,
}

const PHRASE_HEADER: &str = "CEFR is a six-level scale, with each level corresponding to a specific level of English language proficiency. The levels are: \n\n- A1 (1): Beginner\n- A2 (2): Elementary\n- B1 (3): Intermediate\n- B2 (4): Upper Intermediate\n- C1 (5): Advanced\n- C2 (6): Proficiency\n\nAccording to the CEFR scale, the proficiency level required to use the following phrases are:";

const WORD_HEADER: &str = "GSE is a six-level scale, with each level corresponding to a specific level of English language proficiency. The levels are:\n\n- A1 (1): Beginner\n- A2 (2): Elementary\n- B1 (3): Intermediate\n- B2 (4): Upper Intermediate\n- C1 (5): Advanced\n- C2 (6): Proficiency\n\nAccording to the GSE scale, the proficiency level required to use the following words are:";

/// Route a text to its prompt template: single-token texts are words,
/// everything else is a phrase.
pub fn route(text: &str) -> Result<PromptKind> {
    match tokenize(text).len() {
        0 => Err(Error::EmptyText),
        1 => Ok(PromptKind::Word),
        _ => Ok(PromptKind::Phrase),
    }
}

/// Sample up to `n` exemplars of the requested kind from the training
/// corpus: a seeded uniform draw without replacement, order randomized.
/// When the pool is smaller than `n` the whole pool is returned.
pub fn sample_fewshot(
    train: &Corpus,
    n: usize,
    seed: u64,
    kind: PromptKind,
) -> Result<Vec<FewShotExample>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut pool: Vec<&crate::corpus::Passage> = train
        .passages()
        .iter()
        .filter(|p| match kind {
            PromptKind::Word => p.word_count() == 1,
            PromptKind::Phrase => p.word_count() > 1,
        })
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyPool {
            kind: kind.as_str(),
        });
    }
    let mut rng = seeding::derived_rng(seed, "fewshot", 0);
    pool.shuffle(&mut rng);
    Ok(pool
        .into_iter()
        .take(n)
        .map(|p| FewShotExample {
            text: p.text.clone(),
            label: p.label,
        })
        .collect())
}

fn exemplar_line(kind: PromptKind, example: &FewShotExample) -> String {
    match kind {
        // Display of f64 drops a trailing ".0", matching the template's
        // integer labels ("CEFR: 1") while keeping "CEFR: 3.25".
        PromptKind::Phrase => {
            format!("Phrase: {} -> CEFR: {}", example.text, example.label)
        }
        PromptKind::Word => format!("{},{}", example.text, example.label),
    }
}

fn query_line(kind: PromptKind, query: &str) -> String {
    match kind {
        PromptKind::Phrase => format!("Phrase: {query} -> CEFR:"),
        PromptKind::Word => format!("{query},"),
    }
}

/// Render a prompt: fixed header, one line per exemplar in sampled order,
/// then the query slot. With no exemplars this is the zero-shot prompt.
/// Newlines in the query or an exemplar would corrupt the line protocol and
/// are rejected.
pub fn build_prompt(
    kind: PromptKind,
    exemplars: &[FewShotExample],
    query: &str,
    seed: u64,
) -> Result<PromptBundle> {
    if query.contains('\n') || exemplars.iter().any(|e| e.text.contains('\n')) {
        return Err(Error::QueryContainsNewline);
    }
    let header = match kind {
        PromptKind::Phrase => PHRASE_HEADER,
        PromptKind::Word => WORD_HEADER,
    };
    let mut rendered = String::from(header);
    rendered.push_str("\n\n");
    for example in exemplars {
        rendered.push_str(&exemplar_line(kind, example));
        rendered.push('\n');
    }
    rendered.push_str(&query_line(kind, query));
    Ok(PromptBundle {
        kind,
        rendered,
        exemplars: exemplars.to_vec(),
        seed,
    })
}

static FIRST_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)").expect("valid pattern"));

/// First decimal number in a completion, clamped to [1, 6].
pub fn parse_response(completion: &str) -> Result<f64> {
    let m = FIRST_NUMBER
        .find(completion)
        .ok_or_else(|| Error::UnparseableCompletion(preview(completion)))?;
    let value: f64 = m
        .as_str()
        .parse()
        .map_err(|_| Error::UnparseableCompletion(preview(completion)))?;
    Ok(clamp_score(value))
}

fn preview(completion: &str) -> String {
    let mut p: String = completion.chars().take(60).collect();
    if completion.chars().count() > 60 {
        p.push('…');
    }
    p
}

/// Rate a text by `k` independent runs, each with freshly sampled exemplars,
/// averaging the parsed scores.
///
/// A run whose completion fails to parse is retried once with a fresh seed
/// and then counted as a failure; transport errors abort immediately with
/// the failing run's index. `n_exemplars = 0` gives the zero-shot prompt.
pub fn rate(
    text: &str,
    train: &Corpus,
    client: &dyn LlmClient,
    k: usize,
    base_seed: u64,
    n_exemplars: usize,
) -> Result<RatingResult> {
    if k == 0 {
        return Err(Error::EmptyInput);
    }
    let kind = route(text)?;
    let mut samples = Vec::with_capacity(k);
    let mut failures = 0usize;

    let attempt = |context: &str, run: usize| -> Result<f64> {
        let seed = seeding::derive_seed(base_seed, context, run as u64);
        let exemplars = sample_fewshot(train, n_exemplars, seed, kind)?;
        let prompt = build_prompt(kind, &exemplars, text, seed)?;
        let completion = client.complete(&prompt.rendered).map_err(|e| match e {
            Error::Transport { message, .. } => Error::Transport { run, message },
            other => other,
        })?;
        parse_response(&completion)
    };

    for run in 0..k {
        match attempt("run", run) {
            Ok(score) => samples.push(score),
            Err(Error::UnparseableCompletion(_)) => match attempt("retry", run) {
                Ok(score) => samples.push(score),
                Err(Error::UnparseableCompletion(_)) => failures += 1,
                Err(other) => return Err(other),
            },
            Err(other) => return Err(other),
        }
    }

    if samples.is_empty() {
        return Err(Error::AllRunsFailed { runs: k });
    }
    let score = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(RatingResult {
        score,
        samples,
        prompt_kind: kind,
        failures,
    })
}

/// Outcome counts of a batch labeling pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchOutcome {
    /// Texts labeled in this pass.
    pub labeled: usize,
    /// Texts skipped because the output file already had them.
    pub skipped: usize,
    /// Texts recorded in the sidecar error file.
    pub failed: usize,
}

/// Sidecar path for a batch output file: `<output>.errors`.
pub fn sidecar_path(out_path: &Path) -> PathBuf {
    let mut os = out_path.as_os_str().to_os_string();
    os.push(".errors");
    PathBuf::from(os)
}

#[derive(Deserialize)]
struct ExistingRecord {
    id: String,
}

#[derive(Serialize)]
struct LabeledRecord<'a> {
    id: &'a str,
    text: &'a str,
    ratings: &'a [f64],
    label: f64,
}

#[derive(Serialize)]
struct SidecarRecord<'a> {
    id: &'a str,
    error: &'a str,
    message: String,
}

/// Label `(id, text)` pairs with the LLM rater, streaming results to a
/// corpus-format file.
///
/// The pass is resumable: ids already present in the output file are
/// skipped. Per-text failures go to the `<output>.errors` sidecar instead of
/// aborting the batch. Up to `parallelism` texts are rated concurrently;
/// output order and content depend only on the inputs and seeds.
#[allow(clippy::too_many_arguments)]
pub fn batch_label(
    items: &[(String, String)],
    train: &Corpus,
    client: &(dyn LlmClient + Sync),
    k: usize,
    base_seed: u64,
    n_exemplars: usize,
    parallelism: usize,
    out_path: &Path,
) -> Result<BatchOutcome> {
    if items.is_empty() {
        return Err(Error::EmptyInput);
    }
    let parallelism = parallelism.max(1);

    let mut done: HashSet<String> = HashSet::new();
    if out_path.exists() {
        let content = std::fs::read_to_string(out_path)?;
        let mut valid_lines = Vec::new();
        let mut dropped = false;
        for line in content.lines() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ExistingRecord>(line) {
                Ok(rec) => {
                    done.insert(rec.id);
                    valid_lines.push(line.to_string());
                }
                // A truncated trailing line from an interrupted run is
                // dropped and recomputed.
                Err(_) => dropped = true,
            }
        }
        if dropped {
            let mut rewritten = valid_lines.join("\n");
            if !rewritten.is_empty() {
                rewritten.push('\n');
            }
            std::fs::write(out_path, rewritten)?;
        }
    }

    let mut out = OpenOptions::new().create(true).append(true).open(out_path)?;
    let mut sidecar = OpenOptions::new()
        .create(true)
        .append(true)
        .open(sidecar_path(out_path))?;

    let pending: Vec<&(String, String)> =
        items.iter().filter(|(id, _)| !done.contains(id)).collect();
    let mut outcome = BatchOutcome {
        skipped: items.len() - pending.len(),
        ..BatchOutcome::default()
    };

    for chunk in pending.chunks(parallelism) {
        let results: Vec<Result<RatingResult>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(id, text)| {
                    scope.spawn(move || {
                        let text_seed =
                            seeding::derive_seed(base_seed, &format!("text:{id}"), 0);
                        rate(text, train, client, k, text_seed, n_exemplars)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("rating thread panicked"))
                .collect()
        });

        for ((id, text), result) in chunk.iter().zip(results) {
            match result {
                Ok(rating) => {
                    let record = LabeledRecord {
                        id,
                        text,
                        ratings: &rating.samples,
                        label: rating.score,
                    };
                    let line = serde_json::to_string(&record).map_err(|e| {
                        Error::MalformedRecord {
                            line: 0,
                            message: e.to_string(),
                        }
                    })?;
                    writeln!(out, "{line}")?;
                    out.flush()?;
                    outcome.labeled += 1;
                }
                Err(err) => {
                    let record = SidecarRecord {
                        id,
                        error: err.code(),
                        message: err.to_string(),
                    };
                    let line = serde_json::to_string(&record).map_err(|e| {
                        Error::MalformedRecord {
                            line: 0,
                            message: e.to_string(),
                        }
                    })?;
                    writeln!(sidecar, "{line}")?;
                    sidecar.flush()?;
                    outcome.failed += 1;
                }
            }
        }
    }
    Ok(outcome)
}
