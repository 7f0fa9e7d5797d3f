//! Surface features of a text passage.
//!
//! Difficulty here is predicted from form alone: average word length in
//! characters, average sentence length in characters, and average sentence
//! length in words, with the two sentence-length signals also carried in
//! natural-log form. The tokenizer and sentence splitter are fixed,
//! dictionary-free rules so the same text always yields the same features.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The surface-feature vector of one passage.
///
/// Log fields clamp their mean at 1 before taking `ln`, so they are total and
/// nonnegative even for degenerate sub-1-character means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFeatures {
    pub avg_word_len_chars: f64,
    pub avg_sent_len_chars: f64,
    pub avg_sent_len_words: f64,
    pub ln_sent_len_chars: f64,
    pub ln_sent_len_words: f64,
    pub token_count: usize,
    pub sentence_count: usize,
}

impl SurfaceFeatures {
    /// Version of the tokenizer + feature definitions. Stored in model files
    /// so a model is never applied to features it was not trained on.
    pub const SCHEMA_VERSION: u32 = 1;

    /// The three model inputs, in training order.
    pub fn model_vector(&self) -> [f64; 3] {
        [
            self.avg_word_len_chars,
            self.ln_sent_len_chars,
            self.ln_sent_len_words,
        ]
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

/// Split text into tokens: maximal runs of letters and digits, with
/// apostrophes and hyphens kept when they sit between two such characters
/// ("isn't" is one five-character token). Everything else separates.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_joiner(c)
            && current.chars().last().is_some_and(char::is_alphanumeric)
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Split text into sentences. A sentence ends after a run of `.`, `!`, `?`
/// that is followed by whitespace or the end of the text; trailing
/// unterminated text forms a final sentence. Sentences are trimmed of
/// surrounding whitespace; their length is the character count of the
/// trimmed text, internal spaces and punctuation included.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut push = |slice: &[char]| {
        let s: String = slice.iter().collect();
        let trimmed = s.trim();
        if !trimmed.is_empty() {
            sentences.push(trimmed.to_string());
        }
    };

    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j], '.' | '!' | '?') {
                j += 1;
            }
            if j >= chars.len() || chars[j].is_whitespace() {
                push(&chars[start..j]);
                start = j;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        push(&chars[start..]);
    }
    sentences
}

/// Extract the full feature vector. Errors with [`Error::EmptyText`] when the
/// text has no tokens.
pub fn extract(text: &str) -> Result<SurfaceFeatures> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let sentences = segment_sentences(text);
    debug_assert!(!sentences.is_empty(), "tokens imply at least one sentence");

    let token_count = tokens.len();
    let sentence_count = sentences.len();
    let total_token_chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
    let total_sentence_chars: usize = sentences.iter().map(|s| s.chars().count()).sum();

    let avg_word_len_chars = total_token_chars as f64 / token_count as f64;
    let avg_sent_len_chars = total_sentence_chars as f64 / sentence_count as f64;
    let avg_sent_len_words = token_count as f64 / sentence_count as f64;

    Ok(SurfaceFeatures {
        avg_word_len_chars,
        avg_sent_len_chars,
        avg_sent_len_words,
        ln_sent_len_chars: avg_sent_len_chars.max(1.0).ln(),
        ln_sent_len_words: avg_sent_len_words.max(1.0).ln(),
        token_count,
        sentence_count,
    })
}
