//! Language-model backends.
//!
//! All models are pure: querying a context never mutates state, so repeated
//! queries agree bit for bit and models are safe to share across threads.
//! Three backends cover the desk-scale experiments: an explicit conditional
//! table, a count-based n-gram with additive smoothing, and a seeded random
//! model whose rows are Dirichlet draws.

use crate::dist::NextTokenDistribution;
use crate::dist::LogProb;
use crate::error::Error;
use crate::seed;
use crate::vocab::{format_tokens, parse_tokens, TokenId, TokenSeq, Vocabulary};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

// ── Trait ──

/// A conditional distribution over the next token given a context.
pub trait LanguageModel: Sync {
    /// The model's token alphabet.
    fn vocab(&self) -> &Vocabulary;

    /// The next-token distribution after `context`. Panics on out-of-range
    /// ids: vocabulary agreement is the caller's contract.
    fn next_distribution(&self, context: &[TokenId]) -> NextTokenDistribution;

    /// Log-probability of `response` following `prompt`, by the chain rule
    /// over this model's own factorization.
    fn joint_log_prob(&self, prompt: &[TokenId], response: &[TokenId]) -> LogProb {
        let mut context = prompt.to_vec();
        let mut total = LogProb::ZERO;
        for &token in response {
            total = total + self.next_distribution(&context).log_prob(token);
            context.push(token);
        }
        total
    }
}

fn check_context(vocab: &Vocabulary, context: &[TokenId]) {
    for &t in context {
        assert!(vocab.contains(t), "context token {t} out of range for vocabulary of {}", vocab.size());
    }
}

// ── Table model ──

/// An explicit conditional table. Lookup matches the longest stored suffix
/// of the context; contexts matching nothing use the fallback row.
#[derive(Clone, Debug)]
pub struct TableLm {
    vocab: Vocabulary,
    entries: BTreeMap<TokenSeq, NextTokenDistribution>,
    fallback: NextTokenDistribution,
}

impl TableLm {
    /// Builds a table model, validating row widths and token ranges.
    pub fn new(
        vocab: Vocabulary,
        entries: impl IntoIterator<Item = (TokenSeq, NextTokenDistribution)>,
        fallback: NextTokenDistribution,
    ) -> Result<Self, Error> {
        if fallback.len() != vocab.size() {
            return Err(Error::Schema {
                detail: format!("fallback row has {} entries, want {}", fallback.len(), vocab.size()),
            });
        }
        let mut map = BTreeMap::new();
        for (key, row) in entries {
            for &t in &key {
                if !vocab.contains(t) {
                    return Err(Error::TokenOutOfRange { token: t.0, vocab_size: vocab.size() });
                }
            }
            if row.len() != vocab.size() {
                return Err(Error::Schema {
                    detail: format!(
                        "row for context {:?} has {} entries, want {}",
                        format_tokens(&key),
                        row.len(),
                        vocab.size()
                    ),
                });
            }
            map.insert(key, row);
        }
        Ok(TableLm { vocab, entries: map, fallback })
    }

    /// Stored context rows, sorted by context.
    pub fn entries(&self) -> &BTreeMap<TokenSeq, NextTokenDistribution> {
        &self.entries
    }

    /// The row used when no stored context suffix matches.
    pub fn fallback(&self) -> &NextTokenDistribution {
        &self.fallback
    }
}

impl LanguageModel for TableLm {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[TokenId]) -> NextTokenDistribution {
        check_context(&self.vocab, context);
        // Longest stored suffix wins; the empty suffix is a legal entry.
        for start in 0..=context.len() {
            if let Some(row) = self.entries.get(&context[start..]) {
                return row.clone();
            }
        }
        self.fallback.clone()
    }
}

// ── N-gram model ──

/// A count-based n-gram model with additive smoothing:
/// P(w | c) = (count(c, w) + alpha) / (count(c) + alpha * |V|),
/// where c is the last n-1 tokens of the context.
#[derive(Clone, Debug)]
pub struct NGramLm {
    vocab: Vocabulary,
    order: usize,
    alpha: f64,
    counts: BTreeMap<TokenSeq, Vec<u64>>,
}

impl NGramLm {
    /// Wraps validated counts: keys of length `order - 1`, count rows as wide
    /// as the vocabulary, `alpha > 0`.
    pub fn new(
        vocab: Vocabulary,
        order: usize,
        alpha: f64,
        counts: BTreeMap<TokenSeq, Vec<u64>>,
    ) -> Result<Self, Error> {
        if order == 0 {
            return Err(Error::InvalidConfig { detail: "n-gram order must be at least 1".into() });
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig { detail: format!("alpha must be positive and finite, got {alpha}") });
        }
        for (key, row) in &counts {
            if key.len() != order - 1 {
                return Err(Error::Schema {
                    detail: format!(
                        "count key {:?} has length {}, want {} for order {order}",
                        format_tokens(key),
                        key.len(),
                        order - 1
                    ),
                });
            }
            for &t in key {
                if !vocab.contains(t) {
                    return Err(Error::TokenOutOfRange { token: t.0, vocab_size: vocab.size() });
                }
            }
            if row.len() != vocab.size() {
                return Err(Error::Schema {
                    detail: format!(
                        "count row for {:?} has {} entries, want {}",
                        format_tokens(key),
                        row.len(),
                        vocab.size()
                    ),
                });
            }
        }
        Ok(NGramLm { vocab, order, alpha, counts })
    }

    /// Counts all length-n windows of each corpus sequence.
    pub fn train(
        vocab: Vocabulary,
        order: usize,
        alpha: f64,
        corpus: &[TokenSeq],
    ) -> Result<Self, Error> {
        if order == 0 {
            return Err(Error::InvalidConfig { detail: "n-gram order must be at least 1".into() });
        }
        let mut counts: BTreeMap<TokenSeq, Vec<u64>> = BTreeMap::new();
        for seq in corpus {
            for &t in seq {
                if !vocab.contains(t) {
                    return Err(Error::TokenOutOfRange { token: t.0, vocab_size: vocab.size() });
                }
            }
            for window in seq.windows(order) {
                let (context, token) = window.split_at(order - 1);
                let row = counts.entry(context.to_vec()).or_insert_with(|| vec![0; vocab.size()]);
                row[token[0].index()] += 1;
            }
        }
        NGramLm::new(vocab, order, alpha, counts)
    }

    /// The n in n-gram.
    pub fn order(&self) -> usize {
        self.order
    }

    /// The additive-smoothing constant.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Raw window counts keyed by context.
    pub fn counts(&self) -> &BTreeMap<TokenSeq, Vec<u64>> {
        &self.counts
    }
}

impl LanguageModel for NGramLm {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[TokenId]) -> NextTokenDistribution {
        check_context(&self.vocab, context);
        let start = context.len().saturating_sub(self.order - 1);
        let key = &context[start..];
        let zeros;
        let row = match self.counts.get(key) {
            Some(row) => row.as_slice(),
            None => {
                zeros = vec![0u64; self.vocab.size()];
                zeros.as_slice()
            }
        };
        let total: u64 = row.iter().sum();
        let denom = total as f64 + self.alpha * self.vocab.size() as f64;
        let probs = row.iter().map(|&c| (c as f64 + self.alpha) / denom).collect();
        NextTokenDistribution::new(probs).expect("smoothed row is a valid distribution")
    }
}

// ── Dirichlet model ──

/// A seeded random model: the row for a context is a Dirichlet(alpha, ...,
/// alpha) draw keyed by (seed, last `context_len` tokens). Rows are
/// materialized on demand from a counter-based RNG, so full enumeration over
/// every context is reproducible and order-independent.
#[derive(Clone, Debug)]
pub struct DirichletLm {
    vocab: Vocabulary,
    context_len: usize,
    alpha: f64,
    seed: u64,
}

impl DirichletLm {
    /// A model whose rows condition on the last `context_len` tokens.
    pub fn new(vocab: Vocabulary, context_len: usize, alpha: f64, seed: u64) -> Result<Self, Error> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig { detail: format!("alpha must be positive and finite, got {alpha}") });
        }
        Ok(DirichletLm { vocab, context_len, alpha, seed })
    }

    /// Number of trailing context tokens a row depends on.
    pub fn context_len(&self) -> usize {
        self.context_len
    }

    /// The instance seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl LanguageModel for DirichletLm {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[TokenId]) -> NextTokenDistribution {
        check_context(&self.vocab, context);
        let start = context.len().saturating_sub(self.context_len);
        let mut rng = seed::rng_from(seed::mix_tokens(self.seed, &context[start..]));
        let gamma = Gamma::new(self.alpha, 1.0).expect("alpha validated at construction");
        let draws: Vec<f64> = (0..self.vocab.size()).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        assert!(total > 0.0, "gamma draws summed to zero");
        NextTokenDistribution::new(draws.into_iter().map(|g| g / total).collect())
            .expect("normalized draws are a valid distribution")
    }
}

// ── Serialization ──

/// The on-disk model document. `entries`/`counts` keys are comma-separated
/// token ids; the empty string keys the empty context.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ModelFile {
    Table {
        vocab_size: usize,
        eos: Option<u32>,
        entries: BTreeMap<String, Vec<f64>>,
        fallback: Vec<f64>,
    },
    Ngram {
        vocab_size: usize,
        eos: Option<u32>,
        counts: BTreeMap<String, Vec<u64>>,
        alpha: f64,
    },
}

/// A loaded model file: table or n-gram.
#[derive(Clone, Debug)]
pub enum Model {
    Table(TableLm),
    NGram(NGramLm),
}

impl LanguageModel for Model {
    fn vocab(&self) -> &Vocabulary {
        match self {
            Model::Table(m) => m.vocab(),
            Model::NGram(m) => m.vocab(),
        }
    }

    fn next_distribution(&self, context: &[TokenId]) -> NextTokenDistribution {
        match self {
            Model::Table(m) => m.next_distribution(context),
            Model::NGram(m) => m.next_distribution(context),
        }
    }
}

impl From<TableLm> for Model {
    fn from(m: TableLm) -> Self {
        Model::Table(m)
    }
}

impl From<NGramLm> for Model {
    fn from(m: NGramLm) -> Self {
        Model::NGram(m)
    }
}

fn vocab_from_parts(vocab_size: usize, eos: Option<u32>) -> Result<Vocabulary, Error> {
    if vocab_size == 0 {
        return Err(Error::Schema { detail: "vocab_size must be at least 1".into() });
    }
    match eos {
        None => Ok(Vocabulary::new(vocab_size)),
        Some(e) if (e as usize) < vocab_size => Ok(Vocabulary::with_eos(vocab_size, TokenId(e))),
        Some(e) => Err(Error::Schema { detail: format!("eos {e} out of range for vocab_size {vocab_size}") }),
    }
}

fn parse_key(key: &str) -> Result<TokenSeq, Error> {
    parse_tokens(key).map_err(|_| Error::Schema { detail: format!("bad context key {key:?}") })
}

/// Writes a model as its JSON document.
pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<(), Error> {
    let file = match model {
        Model::Table(m) => ModelFile::Table {
            vocab_size: m.vocab().size(),
            eos: m.vocab().eos().map(|t| t.0),
            entries: m
                .entries
                .iter()
                .map(|(k, row)| (format_tokens(k), row.probs().to_vec()))
                .collect(),
            fallback: m.fallback.probs().to_vec(),
        },
        Model::NGram(m) => ModelFile::Ngram {
            vocab_size: m.vocab().size(),
            eos: m.vocab().eos().map(|t| t.0),
            counts: m.counts.iter().map(|(k, row)| (format_tokens(k), row.clone())).collect(),
            alpha: m.alpha,
        },
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads and validates a model JSON document.
pub fn load_model(path: impl AsRef<Path>) -> Result<Model, Error> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    match file {
        ModelFile::Table { vocab_size, eos, entries, fallback } => {
            let vocab = vocab_from_parts(vocab_size, eos)?;
            let fallback = NextTokenDistribution::new(fallback)
                .map_err(|e| Error::Schema { detail: format!("fallback: {e}") })?;
            let mut rows = Vec::with_capacity(entries.len());
            for (key, probs) in entries {
                let context = parse_key(&key)?;
                let row = NextTokenDistribution::new(probs)
                    .map_err(|e| Error::Schema { detail: format!("entry {key:?}: {e}") })?;
                rows.push((context, row));
            }
            Ok(Model::Table(TableLm::new(vocab, rows, fallback)?))
        }
        ModelFile::Ngram { vocab_size, eos, counts, alpha } => {
            let vocab = vocab_from_parts(vocab_size, eos)?;
            let mut map = BTreeMap::new();
            let mut key_len: Option<usize> = None;
            for (key, row) in counts {
                let context = parse_key(&key)?;
                match key_len {
                    None => key_len = Some(context.len()),
                    Some(len) if len != context.len() => {
                        return Err(Error::Schema {
                            detail: format!("count key {key:?} has length {}, want {len}", context.len()),
                        })
                    }
                    Some(_) => {}
                }
                map.insert(context, row);
            }
            // Order is implied by the keys; an empty table decodes as order 1
            // (every row is the smoothed uniform either way).
            let order = key_len.map_or(1, |len| len + 1);
            Ok(Model::NGram(NGramLm::new(vocab, order, alpha, map)?))
        }
    }
}
