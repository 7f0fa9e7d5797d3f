//! Crate-wide error type.

use thiserror::Error;

/// Coarse error class used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data, files, or arguments: exit code 3.
    Data,
    /// LLM client or transport failure: exit code 4.
    Client,
}

#[derive(Debug, Error)]
pub enum Error {
    // --- corpus ---
    #[error("unknown CEFR level: {0:?}")]
    UnknownLevel(String),
    #[error("score {0} outside the [1, 6] scale")]
    ScoreOutOfRange(f64),
    #[error("consensus of an empty rating list")]
    EmptyRatings,
    #[error("corpus has no passages")]
    EmptyCorpus,
    #[error("record {id}: rating {value} outside [1, 6]")]
    RatingOutOfRange { id: String, value: f64 },
    #[error("record {id}: label {value} outside [1, 6]")]
    LabelOutOfRange { id: String, value: f64 },
    #[error("record {id}: stored label {stored} disagrees with rating mean {computed}")]
    LabelMismatch {
        id: String,
        stored: f64,
        computed: f64,
    },
    #[error("record {id}: neither ratings nor label present")]
    MissingLabel { id: String },
    #[error("record {id}: text has no tokens")]
    NoTokens { id: String },
    #[error("duplicate passage id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("cannot subsample: no passages at floor level(s) {missing:?}")]
    MissingBuckets { missing: Vec<u8> },

    // --- features ---
    #[error("text has no tokens")]
    EmptyText,

    // --- linear model / ensemble ---
    #[error("need at least {needed} samples to fit, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("non-finite value in fit input")]
    NonFiniteInput,
    #[error("normal equations are singular even with the ridge fallback")]
    SingularSystem,
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error("model schema version {found} does not match current version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("expected {expected} base scores, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("tuning size {n_tune} must be in 1..{len}")]
    BadTuneSize { n_tune: usize, len: usize },
    #[error("no prediction for passage {0:?}")]
    MissingPrediction(String),

    // --- metrics ---
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("correlation undefined for a constant vector")]
    UndefinedCorrelation,
    #[error("kappa undefined: no expected disagreement")]
    UndefinedKappa,

    // --- llm rater ---
    #[error("no {kind} exemplars in the training pool")]
    EmptyPool { kind: &'static str },
    #[error("query contains a newline")]
    QueryContainsNewline,
    #[error("no numeric rating in completion {0:?}")]
    UnparseableCompletion(String),
    #[error("all {runs} rating runs failed to parse")]
    AllRunsFailed { runs: usize },
    #[error("run {run}: transport error: {message}")]
    Transport { run: usize, message: String },
    #[error("transcript has no completion for prompt hash {0}")]
    TranscriptMiss(String),
    #[error("credential env var {0} is not set")]
    MissingCredential(String),

    // --- config / io ---
    #[error("config line {line}: {message}")]
    MalformedConfig { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Which exit-code class this error belongs to.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::AllRunsFailed { .. }
            | Error::Transport { .. }
            | Error::TranscriptMiss(_)
            | Error::MissingCredential(_) => ErrorClass::Client,
            _ => ErrorClass::Data,
        }
    }

    /// Stable machine-readable code, used in CLI stderr lines and HTTP bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownLevel(_) => "UnknownLevel",
            Error::ScoreOutOfRange(_) => "ScoreOutOfRange",
            Error::EmptyRatings => "EmptyRatings",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::RatingOutOfRange { .. } => "RatingOutOfRange",
            Error::LabelOutOfRange { .. } => "LabelOutOfRange",
            Error::LabelMismatch { .. } => "LabelMismatch",
            Error::MissingLabel { .. } => "MissingLabel",
            Error::NoTokens { .. } => "NoTokens",
            Error::DuplicateId(_) => "DuplicateId",
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::MissingBuckets { .. } => "MissingBuckets",
            Error::EmptyText => "EmptyText",
            Error::SingularSystem => "SingularSystem",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NonFiniteInput => "NonFiniteInput",
            Error::MalformedModel(_) => "MalformedModel",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::BadTuneSize { .. } => "BadTuneSize",
            Error::MissingPrediction(_) => "MissingPrediction",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::UndefinedCorrelation => "UndefinedCorrelation",
            Error::UndefinedKappa => "UndefinedKappa",
            Error::EmptyPool { .. } => "EmptyPool",
            Error::QueryContainsNewline => "QueryContainsNewline",
            Error::UnparseableCompletion(_) => "UnparseableCompletion",
            Error::AllRunsFailed { .. } => "AllRunsFailed",
            Error::Transport { .. } => "Transport",
            Error::TranscriptMiss(_) => "TranscriptMiss",
            Error::MissingCredential(_) => "MissingCredential",
            Error::MalformedConfig { .. } => "MalformedConfig",
            Error::Io(_) => "Io",
        }
    }
}
