//! Library error type.
//!
//! Invalid *data* (files, rows, budgets) is an `Error`; invariant-violating
//! *arguments* (out-of-range tokens, zero beam width) are caller bugs and
//! panic at the call site instead.

use thiserror::Error;

/// Everything the library can fail with.
#[derive(Error, Debug)]
pub enum Error {
    /// A probability vector failed validation.
    #[error("invalid distribution: {detail}")]
    InvalidDistribution { detail: String },

    /// Masking EOS left a row with zero total mass.
    #[error("degenerate row: masking EOS leaves zero probability mass")]
    DegenerateRow,

    /// An enumeration would visit more leaves than the budget allows.
    #[error("intractable enumeration: {leaves} leaves exceeds budget {budget}")]
    Intractable { leaves: u128, budget: u64 },

    /// A token id could not be parsed from text.
    #[error("invalid token id: {text:?}")]
    TokenParse { text: String },

    /// A token id in input data is outside the vocabulary.
    #[error("token {token} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },

    /// A model file violated the schema.
    #[error("model schema: {detail}")]
    Schema { detail: String },

    /// A model file was not valid JSON.
    #[error("model parse: {source}")]
    Json {
        #[from]
        source: serde_json::Error,
    },

    /// Reading or writing a file failed.
    #[error("io: {source}")]
    Io {
        #[from]
        source: std::io::Error,
    },

    /// A CSV results file had a bad row.
    #[error("csv row {line}: {detail}")]
    CsvRow { line: usize, detail: String },

    /// A JSON-lines results file had a bad line.
    #[error("jsonl line {line}: {detail}")]
    JsonlLine { line: usize, detail: String },

    /// A configuration value was out of its documented range.
    #[error("invalid config: {detail}")]
    InvalidConfig { detail: String },
}
