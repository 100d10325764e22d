//! Baseline decoders: greedy, filtered sampling, and beam search.
//!
//! All scores are summed natural-log probabilities with no length
//! normalization. Ties anywhere resolve toward the lowest token id, and
//! between whole sequences toward the lexicographically smallest one, so
//! every decoder is deterministic given its inputs (plus a seed for
//! sampling).

use crate::dist::{LogProb, NextTokenDistribution};
use crate::error::Error;
use crate::lm::LanguageModel;
use crate::seed::{rng_from, DecodeRng};
use crate::trace::{DecodeTrace, RegenStats, Termination};
use crate::vocab::{TokenId, TokenSeq};
use rand::Rng;

// ── Sampling ──

/// Top-k / top-p sampling knobs. Defaults follow the evaluation setup the
/// engine is calibrated against: k = 10, p = 0.9, temperature = 1.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SamplingConfig {
    /// Keep the k highest-probability tokens.
    pub k: usize,
    /// Then keep the smallest descending prefix with cumulative mass >= p.
    pub p: f64,
    /// Applied first: p_i is reweighted proportionally to p_i^(1/temperature).
    pub temperature: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { k: 10, p: 0.9, temperature: 1.0 }
    }
}

impl SamplingConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.k == 0 {
            return Err(Error::InvalidConfig { detail: "top-k must keep at least one token".into() });
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidConfig { detail: format!("top-p must lie in (0, 1], got {}", self.p) });
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidConfig {
                detail: format!("temperature must be positive and finite, got {}", self.temperature),
            });
        }
        Ok(())
    }
}

/// Applies temperature, then top-k, then top-p, and renormalizes the
/// survivors. Tokens outside the kept set get probability zero.
pub fn filter_top_k_top_p(
    dist: &NextTokenDistribution,
    cfg: &SamplingConfig,
) -> Result<NextTokenDistribution, Error> {
    cfg.validate()?;
    let mut probs = dist.probs().to_vec();
    if cfg.temperature != 1.0 {
        let inv = 1.0 / cfg.temperature;
        for p in &mut probs {
            *p = p.powf(inv);
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
    }

    // Descending probability, ties toward the lower id.
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));

    let kept = &order[..cfg.k.min(order.len())];
    let mut cut = kept.len();
    let mut cumulative = 0.0;
    for (i, &idx) in kept.iter().enumerate() {
        cumulative += probs[idx];
        if cumulative >= cfg.p {
            cut = i + 1;
            break;
        }
    }
    let kept = &kept[..cut];

    let mass: f64 = kept.iter().map(|&i| probs[i]).sum();
    let mut filtered = vec![0.0; probs.len()];
    for &i in kept {
        filtered[i] = probs[i] / mass;
    }
    NextTokenDistribution::new(filtered)
}

/// Draws one token from the filtered distribution.
pub fn sample_step(
    dist: &NextTokenDistribution,
    cfg: &SamplingConfig,
    rng: &mut DecodeRng,
) -> Result<TokenId, Error> {
    let filtered = filter_top_k_top_p(dist, cfg)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in filtered.probs().iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = Some(i);
            if u < acc {
                return Ok(TokenId(i as u32));
            }
        }
    }
    // Rounding left u past the accumulated mass; the last kept token owns
    // the remainder.
    Ok(TokenId(last.expect("filtered distribution keeps at least one token") as u32))
}

// ── Greedy ──

/// Argmax decoding: stops at EOS or after max_len tokens.
pub fn greedy_decode(model: &dyn LanguageModel, prompt: &[TokenId], max_len: usize) -> DecodeTrace {
    let mut trace = DecodeTrace::empty(Termination::MaxLen);
    let mut context = prompt.to_vec();
    for _ in 0..max_len {
        let row = model.next_distribution(&context);
        let token = row.argmax();
        trace.tokens.push(token);
        trace.step_logprobs.push(Some(row.log_prob(token).value()));
        trace.step_entropies.push(Some(row.entropy()));
        context.push(token);
        if model.vocab().is_eos(token) {
            trace.terminated_by = Termination::Eos;
            break;
        }
    }
    trace
}

/// Argmax chain of exactly `len` tokens that treats EOS as an ordinary
/// token; the stepwise-optimal baseline for fixed-length comparisons.
pub fn greedy_fixed(model: &dyn LanguageModel, prompt: &[TokenId], len: usize) -> (TokenSeq, LogProb) {
    let mut context = prompt.to_vec();
    let mut score = LogProb::ZERO;
    for _ in 0..len {
        let row = model.next_distribution(&context);
        let token = row.argmax();
        score = score + row.log_prob(token);
        context.push(token);
    }
    (context[prompt.len()..].to_vec(), score)
}

/// Sampling decoding with a fresh ChaCha stream for `seed`: stops at EOS or
/// after max_len tokens. Per-step log-probs and entropies come from the raw
/// model row; only the draw uses the filtered distribution.
pub fn sample_decode(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    cfg: &SamplingConfig,
    max_len: usize,
    seed: u64,
) -> Result<DecodeTrace, Error> {
    let mut rng = rng_from(seed);
    let mut trace = DecodeTrace::empty(Termination::MaxLen);
    let mut context = prompt.to_vec();
    for _ in 0..max_len {
        let row = model.next_distribution(&context);
        let token = sample_step(&row, cfg, &mut rng)?;
        trace.tokens.push(token);
        trace.step_logprobs.push(Some(row.log_prob(token).value()));
        trace.step_entropies.push(Some(row.entropy()));
        context.push(token);
        if model.vocab().is_eos(token) {
            trace.terminated_by = Termination::Eos;
            break;
        }
    }
    Ok(trace)
}

// ── Beam search ──

/// How a beam run ends.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum BeamMode {
    /// Exactly this many tokens per hypothesis.
    FixedLength(usize),
    /// Hypotheses retire on EOS; live ones stop at this many tokens.
    RunToEos { max_len: usize },
}

/// Beam-search knobs.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct BeamConfig {
    /// Hypotheses kept per step.
    pub width: usize,
    /// Termination rule.
    pub mode: BeamMode,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { width: 4, mode: BeamMode::RunToEos { max_len: 64 } }
    }
}

/// One hypothesis during the search.
#[derive(Clone, Debug)]
struct Beam {
    tokens: TokenSeq,
    score: LogProb,
    finished: bool,
}

fn better(a: &Beam, b: &Beam) -> std::cmp::Ordering {
    // Higher score first; equal scores prefer the lexicographically
    // smallest sequence.
    b.score.cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search from `prefix`, scored by summed log-probability.
///
/// In fixed-length mode with `allow_eos = false`, EOS is masked to
/// probability zero; surviving conditionals keep their raw values so the
/// returned score always equals `joint_log_prob` of the returned tokens. A
/// row left with zero total mass after masking is a degenerate-row error.
/// Run-to-eos mode always treats EOS as live and ignores `allow_eos`.
pub fn beam_search(
    model: &dyn LanguageModel,
    prefix: &[TokenId],
    cfg: &BeamConfig,
    allow_eos: bool,
) -> Result<(TokenSeq, LogProb), Error> {
    if cfg.width == 0 {
        return Err(Error::InvalidConfig { detail: "beam width must be at least 1".into() });
    }
    let eos = model.vocab().eos();
    let (steps, mask_eos, retire_on_eos) = match cfg.mode {
        BeamMode::FixedLength(len) => (len, !allow_eos && eos.is_some(), false),
        BeamMode::RunToEos { max_len } => (max_len, false, eos.is_some()),
    };

    let mut frontier = vec![Beam { tokens: Vec::new(), score: LogProb::ZERO, finished: false }];

    for _ in 0..steps {
        if frontier.iter().all(|b| b.finished) {
            break;
        }
        let mut candidates: Vec<Beam> = Vec::new();
        for beam in &frontier {
            if beam.finished {
                // Retired hypotheses keep their slot and compete by score.
                candidates.push(beam.clone());
                continue;
            }
            let mut context = prefix.to_vec();
            context.extend_from_slice(&beam.tokens);
            let row = model.next_distribution(&context);
            if mask_eos {
                let e = eos.expect("masking implies an EOS id");
                let rest: f64 = row
                    .probs()
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != e.index())
                    .map(|(_, &p)| p)
                    .sum();
                if rest == 0.0 {
                    return Err(Error::DegenerateRow);
                }
            }
            for token in model.vocab().tokens() {
                if mask_eos && Some(token) == eos {
                    continue;
                }
                let p = row.prob(token);
                if p == 0.0 {
                    continue;
                }
                let mut tokens = beam.tokens.clone();
                tokens.push(token);
                let finished = retire_on_eos && Some(token) == eos;
                candidates.push(Beam { tokens, score: beam.score + row.log_prob(token), finished });
            }
        }
        candidates.sort_by(better);
        candidates.truncate(cfg.width);
        frontier = candidates;
    }

    frontier
        .into_iter()
        .min_by(|a, b| better(a, b))
        .map(|b| (b.tokens, b.score))
        .ok_or(Error::InvalidConfig { detail: "beam search produced no hypotheses".into() })
}

/// Rebuilds a trace for a known token sequence by walking the model.
pub fn trace_from_tokens(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    tokens: &[TokenId],
    terminated_by: Termination,
) -> DecodeTrace {
    let mut trace = DecodeTrace::empty(terminated_by);
    let mut context = prompt.to_vec();
    for &token in tokens {
        let row = model.next_distribution(&context);
        trace.tokens.push(token);
        trace.step_logprobs.push(Some(row.log_prob(token).value()));
        trace.step_entropies.push(Some(row.entropy()));
        context.push(token);
    }
    trace.stats = RegenStats::default();
    trace
}
