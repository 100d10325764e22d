//! Probability vectors over a vocabulary and log-space arithmetic.
//!
//! All scores live in natural-log space. Zero probability maps to -inf and
//! every comparison elsewhere in the crate uses [`LOG_TOL`] as its absolute
//! tolerance.

use crate::error::Error;
use crate::vocab::TokenId;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::ops::Add;

/// Absolute tolerance for log-space comparisons.
pub const LOG_TOL: f64 = 1e-9;

/// Absolute tolerance on the total mass of a distribution.
pub const SUM_TOL: f64 = 1e-9;

// ── Log probabilities ──

/// A natural-log probability: finite or -inf, never NaN, never positive.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProb(f64);

impl LogProb {
    /// Log of probability one.
    pub const ZERO: LogProb = LogProb(0.0);

    /// Log of probability zero.
    pub const NEG_INFINITY: LogProb = LogProb(f64::NEG_INFINITY);

    /// Wraps a raw log value. Panics on NaN or a value above zero by more
    /// than [`LOG_TOL`]; values inside the tolerance clamp to zero.
    pub fn new(value: f64) -> Self {
        assert!(!value.is_nan(), "log-probability must not be NaN");
        assert!(value <= LOG_TOL, "log-probability {value} is positive");
        LogProb(value.min(0.0))
    }

    /// Log of a linear-space probability; zero maps to -inf.
    pub fn from_prob(p: f64) -> Self {
        assert!((0.0..=1.0 + SUM_TOL).contains(&p), "probability {p} out of range");
        if p == 0.0 {
            LogProb::NEG_INFINITY
        } else {
            LogProb::new(p.ln())
        }
    }

    /// The raw log value.
    pub fn value(self) -> f64 {
        self.0
    }

    /// Back to linear space.
    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    /// Whether this is the zero-probability sentinel.
    pub fn is_impossible(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl Add for LogProb {
    type Output = LogProb;

    fn add(self, rhs: LogProb) -> LogProb {
        // -inf + -inf stays -inf; NaN cannot arise because both sides are
        // NaN-free and neither can be +inf.
        LogProb(self.0 + rhs.0)
    }
}

impl Eq for LogProb {}

impl PartialOrd for LogProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LogProb {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

// ── Distributions ──

/// Shannon entropy in nats of a probability vector; zero entries contribute
/// nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// A validated next-token distribution: one probability per vocabulary id.
#[derive(Clone, PartialEq, Debug)]
pub struct NextTokenDistribution {
    probs: Vec<f64>,
}

impl NextTokenDistribution {
    /// Validates and wraps a probability vector: non-empty, entries finite
    /// and non-negative, total mass within [`SUM_TOL`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self, Error> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution { detail: "empty probability vector".into() });
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution {
                    detail: format!("entry {i} is {p}, want finite and non-negative"),
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution {
                detail: format!("mass sums to {sum}, want 1 within {SUM_TOL}"),
            });
        }
        Ok(NextTokenDistribution { probs })
    }

    /// The uniform distribution over `n` tokens.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one token");
        NextTokenDistribution { probs: vec![1.0 / n as f64; n] }
    }

    /// All mass on one token.
    pub fn one_hot(n: usize, token: TokenId) -> Self {
        assert!(token.index() < n, "one-hot token {token} out of range for size {n}");
        let mut probs = vec![0.0; n];
        probs[token.index()] = 1.0;
        NextTokenDistribution { probs }
    }

    /// Number of tokens covered.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// True only for the degenerate case `new` rejects; kept for clippy.
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of `token`. Panics if out of range: the caller owns
    /// vocabulary agreement.
    pub fn prob(&self, token: TokenId) -> f64 {
        self.probs[token.index()]
    }

    /// Log-probability of `token`; -inf where the mass is zero.
    pub fn log_prob(&self, token: TokenId) -> LogProb {
        LogProb::from_prob(self.prob(token))
    }

    /// The full probability vector.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    /// The highest-probability token; ties go to the lowest id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0usize;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        TokenId(best as u32)
    }
}
