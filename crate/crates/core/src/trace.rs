//! Decoding traces.
//!
//! Every decoder returns a `DecodeTrace`: the final tokens plus enough
//! per-step bookkeeping to audit the run. Positions are 1-based steps.
//! Regenerated positions have no per-step log-prob or entropy (they were not
//! produced by a per-step draw); their probability enters through the regen
//! event's `new_logprob`, keeping the accounting identity exact.

use crate::dist::LogProb;
use crate::vocab::TokenSeq;
use serde::{Deserialize, Serialize};

/// Why a run stopped.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The regular decoder produced EOS.
    Eos,
    /// The step counter passed max_len.
    MaxLen,
}

/// One window replacement.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RegenEvent {
    /// The fast-pointer step at which the pause fired (1-based).
    pub position: usize,
    /// The window tokens that were replaced.
    pub old_segment: TokenSeq,
    /// Their replacement.
    pub new_segment: TokenSeq,
    /// Joint log-prob of the old window given its prefix.
    pub old_logprob: LogProb,
    /// Joint log-prob of the new window given the same prefix.
    pub new_logprob: LogProb,
}

/// Regeneration accounting for one trace.
#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct RegenStats {
    /// Number of window replacements.
    pub regen_calls: usize,
    /// calls * window size / response length; zero for an empty response.
    pub regen_ratio: f64,
}

/// Full record of one decoding run.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct DecodeTrace {
    /// The final response.
    pub tokens: TokenSeq,
    /// Per-position log-prob of the emitted token under the raw model row;
    /// `None` at regenerated positions.
    pub step_logprobs: Vec<Option<f64>>,
    /// Per-position entropy (nats) of the raw model row; `None` at
    /// regenerated positions.
    pub step_entropies: Vec<Option<f64>>,
    /// Window replacements in firing order.
    pub regen_events: Vec<RegenEvent>,
    /// (t_fast, t_slow) after each step; empty for non-windowed decoders.
    pub pointer_history: Vec<(usize, usize)>,
    /// Why the run stopped.
    pub terminated_by: Termination,
    /// Regeneration accounting.
    pub stats: RegenStats,
}

impl DecodeTrace {
    /// An empty trace that stopped for `terminated_by`.
    pub fn empty(terminated_by: Termination) -> Self {
        DecodeTrace {
            tokens: Vec::new(),
            step_logprobs: Vec::new(),
            step_entropies: Vec::new(),
            regen_events: Vec::new(),
            pointer_history: Vec::new(),
            terminated_by,
            stats: RegenStats::default(),
        }
    }

    /// The trace's own account of the response log-prob: surviving per-step
    /// values plus each regeneration's window score.
    pub fn accounted_log_prob(&self) -> f64 {
        let steps: f64 = self.step_logprobs.iter().flatten().sum();
        let regens: f64 = self.regen_events.iter().map(|e| e.new_logprob.value()).sum();
        steps + regens
    }

    /// Response length in tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Whether the response is empty.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
