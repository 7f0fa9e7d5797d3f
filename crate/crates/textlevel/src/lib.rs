//! CEFR difficulty estimation for short conversational English text.
//!
//! The crate covers the full measurement pipeline: corpus ingestion and
//! splitting, surface-feature extraction, a three-feature linear difficulty
//! model, few-shot LLM rating behind a pluggable completion client, linear
//! stacking of base models, an evaluation framework (MSE, Pearson, QWK,
//! bootstrap confidence intervals), and a low-latency HTTP scoring service.
//!
//! Scores live on the numeric CEFR scale: 1 (A1) through 6 (C2), with
//! half-step "+" levels for A2 through B2.

pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod linear_model;
pub mod llm;
pub mod metrics;
pub mod seeding;
pub mod service;

mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Lower bound of the numeric CEFR scale (A1).
pub const SCALE_MIN: f64 = 1.0;
/// Upper bound of the numeric CEFR scale (C2).
pub const SCALE_MAX: f64 = 6.0;

/// Clamp a raw score onto the numeric CEFR scale.
pub fn clamp_score(raw: f64) -> f64 {
    raw.clamp(SCALE_MIN, SCALE_MAX)
}
