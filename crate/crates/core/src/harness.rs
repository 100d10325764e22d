//! Experiment harness: suboptimality curves, strategy comparisons, theorem
//! sweeps, and results persistence.
//!
//! Randomized sweeps derive one sub-seed per trial, so results are
//! reproducible and independent of worker count; parallel runs collect in
//! trial order.

use crate::dist::LOG_TOL;
use crate::error::Error;
use crate::lm::{load_model, DirichletLm, LanguageModel, Model};
use crate::oracle::{
    global_optimum_bnb, leaf_count, theorem_check, SweepSummary, TheoremReport,
};
use crate::reflection::{reflect_decode, regen_stats, ReflectionConfig};
use crate::seed::mix;
use crate::strategies::{
    beam_search, greedy_decode, greedy_fixed, sample_decode, BeamConfig, BeamMode, SamplingConfig,
};
use crate::vocab::{TokenId, TokenSeq, Vocabulary};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

// ── Model sources ──

/// Where sweep models come from: a fixed file-backed model, or one fresh
/// seeded random instance per trial.
#[derive(Clone, Debug)]
pub enum ModelSource {
    /// A table or n-gram file; every trial shares it.
    File(PathBuf),
    /// A fresh Dirichlet instance per trial, seeded from (sweep seed, trial).
    Dirichlet { vocab_size: usize, context_len: usize, alpha: f64 },
}

impl ModelSource {
    fn instantiate(&self, sweep_seed: u64, trial: usize) -> Result<SourceModel, Error> {
        match self {
            ModelSource::File(path) => Ok(SourceModel::Shared(load_model(path)?)),
            ModelSource::Dirichlet { vocab_size, context_len, alpha } => {
                let vocab = Vocabulary::new(*vocab_size);
                Ok(SourceModel::Fresh(DirichletLm::new(vocab, *context_len, *alpha, mix(sweep_seed, trial as u64))?))
            }
        }
    }

    /// Token-id space of the models this source produces.
    pub fn vocab_size(&self) -> Result<usize, Error> {
        match self {
            ModelSource::File(path) => Ok(load_model(path)?.vocab().size()),
            ModelSource::Dirichlet { vocab_size, .. } => Ok(*vocab_size),
        }
    }
}

/// Caps the sweep thread pool; call once, before the first sweep. Results
/// never depend on the pool size — only throughput does.
pub fn set_worker_threads(n: usize) -> Result<(), Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig { detail: format!("thread pool: {e}") })
}

enum SourceModel {
    Shared(Model),
    Fresh(DirichletLm),
}

impl SourceModel {
    fn as_lm(&self) -> &dyn LanguageModel {
        match self {
            SourceModel::Shared(m) => m,
            SourceModel::Fresh(m) => m,
        }
    }
}

// ── Suboptimality curves ──

/// The exact optimum or a beam-search stand-in.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OptimumProxy {
    /// Branch and bound; identical to exhaustive enumeration.
    Exact,
    /// Fixed-length beam search with this width.
    Beam(usize),
}

/// One curve configuration.
#[derive(Clone, Debug)]
pub struct CurveSpec {
    pub source: ModelSource,
    /// Prompts cycled across trials; empty means one empty prompt.
    pub prompts: Vec<TokenSeq>,
    /// History lengths decoded before the measured continuation.
    pub offsets: Vec<usize>,
    /// Continuation lengths measured.
    pub t_values: Vec<usize>,
    pub proxy: OptimumProxy,
    pub trials: usize,
    pub seed: u64,
    /// Sample the history instead of decoding it greedily.
    pub sampled_history: Option<SamplingConfig>,
    /// Leaf budget for the exact proxy.
    pub budget: u64,
}

/// Fraction of trials whose stepwise continuation attains the (proxied)
/// optimum at one (offset, T).
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct CurvePoint {
    pub offset: usize,
    pub t: usize,
    pub fraction: f64,
    pub trials: usize,
}

/// A curve point as persisted to CSV.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct CurveRow {
    pub offset: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub fraction: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Runs one trial's comparison: does the stepwise continuation attain the
/// proxied optimum from the same context?
fn trial_attains(
    spec: &CurveSpec,
    offset: usize,
    t: usize,
    trial: usize,
) -> Result<bool, Error> {
    let model = spec.source.instantiate(spec.seed, trial)?;
    let model = model.as_lm();
    let mut context = if spec.prompts.is_empty() {
        Vec::new()
    } else {
        spec.prompts[trial % spec.prompts.len()].clone()
    };
    match spec.sampled_history {
        None => {
            let (history, _) = greedy_fixed(model, &context, offset);
            context.extend(history);
        }
        Some(cfg) => {
            // EOS is an ordinary token throughout the harness: histories
            // have exactly `offset` tokens.
            let mut rng = crate::seed::rng_from(mix(mix(spec.seed, trial as u64), 1));
            for _ in 0..offset {
                let row = model.next_distribution(&context);
                let token = crate::strategies::sample_step(&row, &cfg, &mut rng)?;
                context.push(token);
            }
        }
    }
    let (_, greedy_score) = greedy_fixed(model, &context, t);
    let optimum_score = match spec.proxy {
        OptimumProxy::Exact => {
            let leaves = leaf_count(model.vocab().size(), t);
            if leaves > spec.budget as u128 {
                return Err(Error::Intractable { leaves, budget: spec.budget });
            }
            global_optimum_bnb(model, &context, t).logprob
        }
        OptimumProxy::Beam(width) => {
            let cfg = BeamConfig { width, mode: BeamMode::FixedLength(t) };
            beam_search(model, &context, &cfg, true)?.1
        }
    };
    Ok(greedy_score.value() >= optimum_score.value() - LOG_TOL)
}

/// Sweeps every (offset, T) pair, offsets outermost.
pub fn run_curve(spec: &CurveSpec) -> Result<Vec<CurvePoint>, Error> {
    if spec.trials == 0 {
        return Err(Error::InvalidConfig { detail: "curve needs at least one trial".into() });
    }
    // Surface an over-budget exact proxy before burning trials.
    if let OptimumProxy::Exact = spec.proxy {
        let vocab_size = spec.source.vocab_size()?;
        for &t in &spec.t_values {
            let leaves = leaf_count(vocab_size, t);
            if leaves > spec.budget as u128 {
                return Err(Error::Intractable { leaves, budget: spec.budget });
            }
        }
    }
    let mut points = Vec::with_capacity(spec.offsets.len() * spec.t_values.len());
    for &offset in &spec.offsets {
        for &t in &spec.t_values {
            let outcomes: Result<Vec<bool>, Error> = (0..spec.trials)
                .into_par_iter()
                .map(|trial| trial_attains(spec, offset, t, trial))
                .collect();
            let outcomes = outcomes?;
            let wins = outcomes.iter().filter(|&&w| w).count();
            points.push(CurvePoint { offset, t, fraction: wins as f64 / spec.trials as f64, trials: spec.trials });
        }
    }
    Ok(points)
}

// ── Strategy comparison ──

/// One competitor in a comparison.
#[derive(Clone, Debug)]
pub enum StrategySpec {
    Greedy,
    Sample(SamplingConfig),
    Beam { width: usize },
    Reflection(ReflectionConfig),
}

impl StrategySpec {
    /// Stable row label.
    pub fn label(&self) -> String {
        match self {
            StrategySpec::Greedy => "greedy".into(),
            StrategySpec::Sample(c) => format!("sample(k={},p={},t={})", c.k, c.p, c.temperature),
            StrategySpec::Beam { width } => format!("beam({width})"),
            StrategySpec::Reflection(c) => {
                format!("reflection(sigma={},d={},w={})", c.sigma, c.d, c.beam_width)
            }
        }
    }
}

/// One strategy's outcome on a shared (model, prompt, length) task.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub tokens: TokenSeq,
    pub joint_logprob: f64,
    pub regen_calls: usize,
    pub regen_ratio: f64,
    /// Measured, never serialized: wall time is not reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Runs each strategy on the same task. Sampling-based rows share `seed`.
pub fn compare_strategies(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    length: usize,
    specs: &[StrategySpec],
    seed: u64,
) -> Result<Vec<ComparisonRow>, Error> {
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let start = Instant::now();
        let (tokens, stats) = match spec {
            StrategySpec::Greedy => {
                let trace = greedy_decode(model, prompt, length);
                (trace.tokens, trace.stats)
            }
            StrategySpec::Sample(cfg) => {
                let trace = sample_decode(model, prompt, cfg, length, seed)?;
                (trace.tokens, trace.stats)
            }
            StrategySpec::Beam { width } => {
                let cfg = BeamConfig { width: *width, mode: BeamMode::FixedLength(length) };
                let (tokens, _) = beam_search(model, prompt, &cfg, false)?;
                (tokens, Default::default())
            }
            StrategySpec::Reflection(cfg) => {
                let cfg = ReflectionConfig { max_len: length, ..*cfg };
                let trace = reflect_decode(model, prompt, &cfg, seed)?;
                let stats = regen_stats(&trace, cfg.d);
                (trace.tokens, stats)
            }
        };
        rows.push(ComparisonRow {
            strategy: spec.label(),
            joint_logprob: model.joint_log_prob(prompt, &tokens).value(),
            tokens,
            regen_calls: stats.regen_calls,
            regen_ratio: stats.regen_ratio,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

// ── Theorem sweeps ──

/// Checks the bound over fresh Dirichlet instances; reports in trial order.
pub fn theorem_sweep(
    source: &ModelSource,
    prompt: &[TokenId],
    t: usize,
    instances: usize,
    seed: u64,
    budget: u64,
) -> Result<(Vec<TheoremReport>, SweepSummary), Error> {
    let reports: Result<Vec<TheoremReport>, Error> = (0..instances)
        .into_par_iter()
        .map(|trial| {
            let model = source.instantiate(seed, trial)?;
            theorem_check(model.as_lm(), prompt, t, budget)
        })
        .collect();
    let reports = reports?;
    let mut summary = SweepSummary::default();
    for report in &reports {
        summary.absorb(report);
    }
    Ok((reports, summary))
}

// ── Persistence ──

/// Writes curve rows as CSV with the header `offset,T,fraction,trials,seed`.
pub fn write_curve(path: impl AsRef<Path>, rows: &[CurveRow]) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path.as_ref()).map_err(csv_io)?;
    for row in rows {
        writer.serialize(row).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads curve rows back; errors name the offending CSV line.
pub fn read_curve(path: impl AsRef<Path>) -> Result<Vec<CurveRow>, Error> {
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(csv_io)?;
    let mut rows = Vec::new();
    for result in reader.deserialize() {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or(rows.len() + 2);
                return Err(Error::CsvRow { line, detail: e.to_string() });
            }
        }
    }
    Ok(rows)
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io { source: io },
        other => Error::CsvRow { line: 0, detail: format!("{other:?}") },
    }
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), Error> {
    let mut file = std::fs::File::create(path.as_ref())?;
    for item in items {
        let line = serde_json::to_string(item)?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Reads JSON-lines back; errors name the offending line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, Error> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::JsonlLine { line: i + 1, detail: e.to_string() })?,
        );
    }
    Ok(items)
}
