//! Token identifiers and vocabularies.
//!
//! Tokens are dense ids in `0..vocab_size`. A vocabulary optionally
//! designates one id as EOS; models without a stop token simply leave it
//! unset.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of a token in a vocabulary.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    /// The id as a usize, for indexing probability vectors.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A generated or stored sequence of tokens.
pub type TokenSeq = Vec<TokenId>;

/// A dense token alphabet with an optional EOS id.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Vocabulary {
    size: usize,
    eos: Option<TokenId>,
}

impl Vocabulary {
    /// A vocabulary of `size` tokens with no EOS designated.
    ///
    /// Panics if `size` is zero; an empty alphabet has no distributions.
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "vocabulary must contain at least one token");
        Vocabulary { size, eos: None }
    }

    /// A vocabulary of `size` tokens where `eos` ends generation.
    ///
    /// Panics if `eos` is out of range.
    pub fn with_eos(size: usize, eos: TokenId) -> Self {
        assert!(size > 0, "vocabulary must contain at least one token");
        assert!(eos.index() < size, "EOS id {eos} out of range for size {size}");
        Vocabulary { size, eos: Some(eos) }
    }

    /// Number of tokens in the alphabet.
    pub fn size(&self) -> usize {
        self.size
    }

    /// The designated EOS id, if any.
    pub fn eos(&self) -> Option<TokenId> {
        self.eos
    }

    /// Whether `token` is this vocabulary's EOS.
    pub fn is_eos(&self, token: TokenId) -> bool {
        self.eos == Some(token)
    }

    /// Whether `token` is a valid id for this vocabulary.
    pub fn contains(&self, token: TokenId) -> bool {
        token.index() < self.size
    }

    /// All token ids in ascending order.
    pub fn tokens(&self) -> impl Iterator<Item = TokenId> {
        (0..self.size as u32).map(TokenId)
    }
}

/// Formats a token sequence as comma-separated ids, `""` when empty.
pub fn format_tokens(tokens: &[TokenId]) -> String {
    let parts: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
    parts.join(",")
}

/// Parses comma-separated ids; the empty string is the empty sequence.
pub fn parse_tokens(text: &str) -> Result<TokenSeq, crate::Error> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map(TokenId)
                .map_err(|_| crate::Error::TokenParse { text: part.trim().to_string() })
        })
        .collect()
}
