//! Windowed decoding with entropy-gated regeneration.
//!
//! A fast pointer emits tokens with an inner one-step decoder while a slow
//! pointer marks the last committed position. Once the gap reaches the
//! window size d, a pause criterion inspects the entropies of the last d
//! steps; if every one exceeds the threshold, the window is replaced by a
//! fixed-length beam search from the prefix before it and the slow pointer
//! jumps to the fast pointer. EOS from the regular decoder ends the run
//! immediately, mid-window or not, and nothing regenerates after the final
//! token.

use crate::dist::LogProb;
use crate::error::Error;
use crate::lm::LanguageModel;
use crate::seed::rng_from;
use crate::strategies::{beam_search, sample_step, BeamConfig, BeamMode, SamplingConfig};
use crate::trace::{DecodeTrace, RegenEvent, RegenStats, Termination};
use crate::vocab::{TokenId, TokenSeq};

/// The one-step decoder driving the fast pointer.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum InnerStrategy {
    /// Argmax at every step.
    Greedy,
    /// Top-k / top-p sampling.
    Sampling(SamplingConfig),
}

/// Knobs for windowed decoding. Defaults follow the calibrated settings:
/// threshold 0.5 nats, window 4, regeneration beam width 4.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ReflectionConfig {
    /// Pause threshold in nats; `f64::INFINITY` never fires.
    pub sigma: f64,
    /// Window size d.
    pub d: usize,
    /// Beam width used by regeneration.
    pub beam_width: usize,
    /// The regular one-step decoder.
    pub inner: InnerStrategy,
    /// Hard cap on response length.
    pub max_len: usize,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig { sigma: 0.5, d: 4, beam_width: 4, inner: InnerStrategy::Greedy, max_len: 64 }
    }
}

impl ReflectionConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.d == 0 {
            return Err(Error::InvalidConfig { detail: "window size d must be at least 1".into() });
        }
        if self.beam_width == 0 {
            return Err(Error::InvalidConfig { detail: "regeneration beam width must be at least 1".into() });
        }
        if self.sigma.is_nan() {
            return Err(Error::InvalidConfig { detail: "sigma must not be NaN".into() });
        }
        Ok(())
    }
}

/// The pause criterion: fires iff the pointer gap has reached d and the
/// entropies at steps t_fast, t_fast-1, ..., t_fast-d+1 all strictly exceed
/// sigma. `step_entropies[i]` belongs to step i+1; regenerated positions
/// hold `None` and never satisfy the test (the slow-pointer jump keeps them
/// out of every window this is called on).
pub fn if_pause(step_entropies: &[Option<f64>], t_fast: usize, t_slow: usize, sigma: f64, d: usize) -> bool {
    if d == 0 || t_fast < d || t_fast - t_slow < d || step_entropies.len() < t_fast {
        return false;
    }
    step_entropies[t_fast - d..t_fast].iter().all(|e| matches!(e, Some(h) if *h > sigma))
}

/// Fixed-length beam search of d tokens from `prefix`, EOS masked.
pub fn regenerate(
    model: &dyn LanguageModel,
    prefix: &[TokenId],
    d: usize,
    beam_width: usize,
) -> Result<(TokenSeq, LogProb), Error> {
    beam_search(model, prefix, &BeamConfig { width: beam_width, mode: BeamMode::FixedLength(d) }, false)
}

/// Regeneration accounting for a finished trace decoded with window size d.
pub fn regen_stats(trace: &DecodeTrace, d: usize) -> RegenStats {
    let calls = trace.regen_events.len();
    let ratio = if trace.tokens.is_empty() { 0.0 } else { (calls * d) as f64 / trace.tokens.len() as f64 };
    RegenStats { regen_calls: calls, regen_ratio: ratio }
}

/// Decodes with the fast/slow pointer loop.
///
/// Each iteration the inner decoder emits one token whose raw-row log-prob
/// and entropy are recorded; EOS stops the run before any pause check. When
/// the pause criterion fires at step t_fast, positions t_fast-d+1..=t_fast
/// are replaced by `regenerate` from the prefix ending at t_fast-d, their
/// per-step records become `None`, and t_slow jumps to t_fast. The loop
/// never runs past max_len, so no regeneration happens after the final
/// token. `seed` feeds the sampling inner decoder; greedy ignores it.
pub fn reflect_decode(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    cfg: &ReflectionConfig,
    seed: u64,
) -> Result<DecodeTrace, Error> {
    cfg.validate()?;
    let mut rng = rng_from(seed);
    let mut trace = DecodeTrace::empty(Termination::MaxLen);
    let mut t_slow = 0usize;

    for t_fast in 1..=cfg.max_len {
        let mut context = prompt.to_vec();
        context.extend_from_slice(&trace.tokens);
        let row = model.next_distribution(&context);
        let token = match cfg.inner {
            InnerStrategy::Greedy => row.argmax(),
            InnerStrategy::Sampling(ref s) => sample_step(&row, s, &mut rng)?,
        };
        trace.tokens.push(token);
        trace.step_logprobs.push(Some(row.log_prob(token).value()));
        trace.step_entropies.push(Some(row.entropy()));

        if model.vocab().is_eos(token) {
            trace.pointer_history.push((t_fast, t_slow));
            trace.terminated_by = Termination::Eos;
            break;
        }

        if if_pause(&trace.step_entropies, t_fast, t_slow, cfg.sigma, cfg.d) {
            let keep = t_fast - cfg.d;
            let mut prefix = prompt.to_vec();
            prefix.extend_from_slice(&trace.tokens[..keep]);
            let old_segment = trace.tokens[keep..].to_vec();
            let old_logprob: f64 = trace.step_logprobs[keep..].iter().flatten().sum();
            let (new_segment, new_logprob) = regenerate(model, &prefix, cfg.d, cfg.beam_width)?;

            trace.tokens.truncate(keep);
            trace.tokens.extend_from_slice(&new_segment);
            trace.step_logprobs.truncate(keep);
            trace.step_logprobs.extend(std::iter::repeat(None).take(new_segment.len()));
            trace.step_entropies.truncate(keep);
            trace.step_entropies.extend(std::iter::repeat(None).take(new_segment.len()));
            trace.regen_events.push(RegenEvent {
                position: t_fast,
                old_segment,
                new_segment,
                old_logprob: LogProb::new(old_logprob),
                new_logprob,
            });
            t_slow = t_fast;
        }

        trace.pointer_history.push((t_fast, t_slow));
    }

    trace.stats = regen_stats(&trace, cfg.d);
    Ok(trace)
}
