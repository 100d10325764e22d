//! Command-line runner for decoding, optimum queries, bound checking, curve
//! sweeps, strategy comparison, and n-gram training.
//!
//! Every subcommand accepts `--config FILE`: a JSON object keyed by long
//! flag names whose values fill in flags left unset (explicit flags win).
//! Runs are deterministic — randomness comes only from `--seed`, and wall
//! times go to stderr. Exit codes: 0 success (and bound-clean sweeps),
//! 1 bound violations found, 2 input errors, 3 infeasible budget.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rwd_core::harness::{
    compare_strategies, run_curve, set_worker_threads, theorem_sweep, write_curve, write_jsonl,
    CurveRow, CurveSpec, ModelSource, OptimumProxy, StrategySpec,
};
use rwd_core::lm::{load_model, save_model, Model, NGramLm};
use rwd_core::oracle::{
    global_optimum_bnb, global_optimum_exhaustive, leaf_count, DEFAULT_LEAF_BUDGET,
};
use rwd_core::reflection::{reflect_decode, InnerStrategy, ReflectionConfig};
use rwd_core::seed::mix;
use rwd_core::strategies::{
    beam_search, greedy_decode, sample_decode, trace_from_tokens, BeamConfig, BeamMode,
    SamplingConfig,
};
use rwd_core::trace::Termination;
use rwd_core::vocab::{format_tokens, parse_tokens, TokenId, TokenSeq, Vocabulary};
use rwd_core::{DirichletLm, Error, LanguageModel};

// ── Command tree ──

#[derive(Parser)]
#[command(name = "rwd", version, about = "Decoding experiments on small token-level language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a response and print its trace as JSON
    Decode(DecodeArgs),
    /// Print the globally optimal fixed-length continuation
    Oracle(OracleArgs),
    /// Check the suboptimality bound on one or many instances
    Theorem(TheoremArgs),
    /// Sweep stepwise-vs-optimal agreement over offsets and lengths
    Curve(CurveArgs),
    /// Run several strategies on one task and record the outcomes
    Compare(CompareArgs),
    /// Fit an additively smoothed n-gram model from a token corpus
    TrainNgram(TrainNgramArgs),
}

/// Where the model comes from; exactly one source must be given.
#[derive(Args)]
struct SourceArgs {
    /// Model file (table or n-gram JSON)
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Fresh random model: VOCAB,ALPHA[,CONTEXT] (context defaults to 1)
    #[arg(long, value_name = "SPEC", conflicts_with = "model")]
    dirichlet: Option<String>,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Prompt as comma-separated token ids [default: empty]
    #[arg(long, value_name = "IDS")]
    prompt: Option<String>,
    /// greedy | sample | beam | reflection [default: reflection]
    #[arg(long)]
    strategy: Option<String>,
    /// Entropy threshold for pausing [default: 0.5]
    #[arg(long)]
    sigma: Option<f64>,
    /// Window length paused over and regenerated [default: 4]
    #[arg(short, long)]
    d: Option<usize>,
    /// Beam width [default: 4]
    #[arg(long)]
    beam: Option<usize>,
    /// Top-k cutoff for sampling [default: 10]
    #[arg(long)]
    k: Option<usize>,
    /// Top-p (nucleus) cutoff for sampling [default: 0.9]
    #[arg(long)]
    p: Option<f64>,
    /// Softmax temperature for sampling [default: 1.0]
    #[arg(long)]
    temperature: Option<f64>,
    /// Inner proposal decoder for reflection: greedy | sample [default: greedy]
    #[arg(long)]
    inner: Option<String>,
    /// Maximum response length [default: 64]
    #[arg(long)]
    max_len: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file of flag defaults; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Prompt as comma-separated token ids [default: empty]
    #[arg(long, value_name = "IDS")]
    prompt: Option<String>,
    /// Continuation length to optimize over
    #[arg(short = 'T', long = "T", value_name = "LEN")]
    t: Option<usize>,
    /// Leaf budget before an instance is infeasible [default: 10000000]
    #[arg(long)]
    budget: Option<u64>,
    /// bnb | exhaustive [default: bnb]
    #[arg(long)]
    method: Option<String>,
    /// RNG seed (models a --dirichlet instance) [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file of flag defaults; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TheoremArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Prompt as comma-separated token ids [default: empty]
    #[arg(long, value_name = "IDS")]
    prompt: Option<String>,
    /// Response length checked
    #[arg(short = 'T', long = "T", value_name = "LEN")]
    t: Option<usize>,
    /// Instances to check [default: 1]
    #[arg(long)]
    instances: Option<usize>,
    /// Sweep seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Leaf budget before an instance is infeasible [default: 10000000]
    #[arg(long)]
    budget: Option<u64>,
    /// Write per-instance reports here as JSON lines
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
    /// JSON file of flag defaults; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Prompt as comma-separated token ids [default: empty]
    #[arg(long, value_name = "IDS")]
    prompt: Option<String>,
    /// History lengths, comma-separated [default: 0]
    #[arg(long, value_name = "LIST")]
    offsets: Option<String>,
    /// Continuation lengths: LO..HI (inclusive) or a comma list
    #[arg(short = 'T', long = "T", value_name = "SPEC")]
    t: Option<String>,
    /// Trials per (offset, T) point [default: 100]
    #[arg(long)]
    trials: Option<usize>,
    /// Sweep seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// exact | beam:WIDTH [default: exact]
    #[arg(long)]
    proxy: Option<String>,
    /// Sample histories with the k/p/temperature flags instead of decoding
    /// them greedily
    #[arg(long)]
    sampled_history: bool,
    /// Top-k cutoff for sampled histories [default: 10]
    #[arg(long)]
    k: Option<usize>,
    /// Top-p cutoff for sampled histories [default: 0.9]
    #[arg(long)]
    p: Option<f64>,
    /// Temperature for sampled histories [default: 1.0]
    #[arg(long)]
    temperature: Option<f64>,
    /// Leaf budget for the exact proxy [default: 10000000]
    #[arg(long)]
    budget: Option<u64>,
    /// CSV output path (offset,T,fraction,trials,seed)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
    /// JSON file of flag defaults; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Prompt as comma-separated token ids [default: empty]
    #[arg(long, value_name = "IDS")]
    prompt: Option<String>,
    /// Shared response length
    #[arg(short = 'T', long = "T", value_name = "LEN")]
    t: Option<usize>,
    /// Comma list of greedy | sample | beam[:W] | reflection
    /// [default: greedy,sample,beam,reflection]
    #[arg(long, value_name = "LIST")]
    strategies: Option<String>,
    /// Entropy threshold for the reflection row [default: 0.5]
    #[arg(long)]
    sigma: Option<f64>,
    /// Window length for the reflection row [default: 4]
    #[arg(short, long)]
    d: Option<usize>,
    /// Beam width for beam and reflection rows [default: 4]
    #[arg(long)]
    beam: Option<usize>,
    /// Top-k cutoff for the sampling row [default: 10]
    #[arg(long)]
    k: Option<usize>,
    /// Top-p cutoff for the sampling row [default: 0.9]
    #[arg(long)]
    p: Option<f64>,
    /// Temperature for the sampling row [default: 1.0]
    #[arg(long)]
    temperature: Option<f64>,
    /// RNG seed shared by the randomized rows [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// JSON-lines output path
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON file of flag defaults; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainNgramArgs {
    /// Corpus file: one comma-separated token sequence per line
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Window length n (order) of the model
    #[arg(short = 'n', long = "n", value_name = "N")]
    n: Option<usize>,
    /// Additive smoothing pseudo-count [default: 1.0]
    #[arg(long)]
    alpha: Option<f64>,
    /// Token-id space of the corpus
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Token id that ends a response
    #[arg(long)]
    eos: Option<u32>,
    /// Model output path (JSON)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON file of flag defaults; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

// ── Config-file merging ──

/// Defaults loaded from `--config`: a JSON object keyed by long flag names.
struct FileCfg(serde_json::Value);

impl FileCfg {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileCfg(serde_json::Value::Null)) };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if !value.is_object() {
            bail!("config {} must be a JSON object", path.display());
        }
        Ok(FileCfg(value))
    }

    fn get<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(v) => Ok(Some(
                serde_json::from_value(v.clone()).with_context(|| format!("config key {key:?}"))?,
            )),
        }
    }
}

/// The flag if set, else the config value under `key`.
fn pick<T: serde::de::DeserializeOwned>(flag: Option<T>, cfg: &FileCfg, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

/// `pick` with a final built-in default.
fn pick_or<T: serde::de::DeserializeOwned>(flag: Option<T>, cfg: &FileCfg, key: &str, default: T) -> Result<T> {
    Ok(pick(flag, cfg, key)?.unwrap_or(default))
}

// ── Flag parsing ──

fn parse_dirichlet(spec: &str) -> Result<(usize, f64, usize)> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 && parts.len() != 3 {
        bail!("--dirichlet takes VOCAB,ALPHA or VOCAB,ALPHA,CONTEXT, got {spec:?}");
    }
    let vocab: usize = parts[0].trim().parse().with_context(|| format!("vocab size in {spec:?}"))?;
    let alpha: f64 = parts[1].trim().parse().with_context(|| format!("alpha in {spec:?}"))?;
    let context: usize = match parts.get(2) {
        Some(c) => c.trim().parse().with_context(|| format!("context length in {spec:?}"))?,
        None => 1,
    };
    Ok((vocab, alpha, context))
}

/// `LO..HI` (inclusive) or a comma list; every value must be positive.
fn parse_t_values(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    let values: Vec<usize> = if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().with_context(|| format!("range start in {spec:?}"))?;
        let hi: usize = hi.trim().parse().with_context(|| format!("range end in {spec:?}"))?;
        if hi < lo {
            bail!("empty range {spec:?}");
        }
        (lo..=hi).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<usize>().with_context(|| format!("length {s:?}")))
            .collect::<Result<_>>()?
    };
    if values.is_empty() || values.contains(&0) {
        bail!("continuation lengths must be positive, got {spec:?}");
    }
    Ok(values)
}

fn parse_offsets(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("offset {s:?}")))
        .collect()
}

fn parse_proxy(spec: &str) -> Result<OptimumProxy> {
    if spec == "exact" {
        return Ok(OptimumProxy::Exact);
    }
    if let Some(width) = spec.strip_prefix("beam:") {
        let width: usize = width.parse().with_context(|| format!("beam width in {spec:?}"))?;
        if width == 0 {
            bail!("beam proxy width must be positive");
        }
        return Ok(OptimumProxy::Beam(width));
    }
    bail!("--proxy is exact or beam:WIDTH, got {spec:?}")
}

fn parse_strategies(
    spec: &str,
    sampling: SamplingConfig,
    reflection: &ReflectionConfig,
    beam_width: usize,
) -> Result<Vec<StrategySpec>> {
    spec.split(',')
        .map(|item| match item.trim() {
            "greedy" => Ok(StrategySpec::Greedy),
            "sample" => Ok(StrategySpec::Sample(sampling)),
            "beam" => Ok(StrategySpec::Beam { width: beam_width }),
            "reflection" => Ok(StrategySpec::Reflection(*reflection)),
            other => {
                if let Some(width) = other.strip_prefix("beam:") {
                    let width: usize =
                        width.parse().with_context(|| format!("beam width in {other:?}"))?;
                    Ok(StrategySpec::Beam { width })
                } else {
                    bail!("unknown strategy {other:?} (greedy | sample | beam[:W] | reflection)")
                }
            }
        })
        .collect()
}

// ── Shared plumbing ──

/// Prints one stdout line; a reader hanging up (e.g. `| head`) is a clean
/// exit, not a panic.
fn emit(line: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{line}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        return Err(e.into());
    }
    Ok(())
}

/// Resolves the model source; a flag-level source overrides the config file.
fn resolve_source(args: &SourceArgs, cfg: &FileCfg) -> Result<ModelSource> {
    let (model, dirichlet) = if args.model.is_some() || args.dirichlet.is_some() {
        (args.model.clone(), args.dirichlet.clone())
    } else {
        (cfg.get::<PathBuf>("model")?, cfg.get::<String>("dirichlet")?)
    };
    match (model, dirichlet) {
        (Some(_), Some(_)) => bail!("--model and --dirichlet are mutually exclusive"),
        (Some(path), None) => Ok(ModelSource::File(path)),
        (None, Some(spec)) => {
            let (vocab_size, alpha, context_len) = parse_dirichlet(&spec)?;
            Ok(ModelSource::Dirichlet { vocab_size, context_len, alpha })
        }
        (None, None) => bail!("a model source is required: --model FILE or --dirichlet V,ALPHA[,CTX]"),
    }
}

/// One concrete model for the single-instance subcommands. A Dirichlet
/// source yields the sweep's trial-0 instance for the same seed.
enum OwnedModel {
    File(Model),
    Random(DirichletLm),
}

impl OwnedModel {
    fn as_lm(&self) -> &dyn LanguageModel {
        match self {
            OwnedModel::File(m) => m,
            OwnedModel::Random(m) => m,
        }
    }
}

fn single_model(source: &ModelSource, seed: u64) -> Result<OwnedModel> {
    match source {
        ModelSource::File(path) => Ok(OwnedModel::File(load_model(path)?)),
        ModelSource::Dirichlet { vocab_size, context_len, alpha } => Ok(OwnedModel::Random(
            DirichletLm::new(Vocabulary::new(*vocab_size), *context_len, *alpha, mix(seed, 0))?,
        )),
    }
}

fn checked_tokens(text: &str, vocab_size: usize) -> Result<TokenSeq> {
    let tokens = parse_tokens(text)?;
    for &t in &tokens {
        if t.index() >= vocab_size {
            return Err(Error::TokenOutOfRange { token: t.0, vocab_size }.into());
        }
    }
    Ok(tokens)
}

fn resolve_prompt(flag: Option<String>, cfg: &FileCfg, vocab_size: usize) -> Result<TokenSeq> {
    match pick(flag, cfg, "prompt")? {
        Some(text) => checked_tokens(&text, vocab_size),
        None => Ok(Vec::new()),
    }
}

fn resolve_sampling(
    k: Option<usize>,
    p: Option<f64>,
    temperature: Option<f64>,
    cfg: &FileCfg,
) -> Result<SamplingConfig> {
    let default = SamplingConfig::default();
    Ok(SamplingConfig {
        k: pick_or(k, cfg, "k", default.k)?,
        p: pick_or(p, cfg, "p", default.p)?,
        temperature: pick_or(temperature, cfg, "temperature", default.temperature)?,
    })
}

fn maybe_workers(flag: Option<usize>, cfg: &FileCfg) -> Result<()> {
    if let Some(n) = pick(flag, cfg, "workers")? {
        set_worker_threads(n)?;
    }
    Ok(())
}

// ── Subcommands ──

fn cmd_decode(args: DecodeArgs) -> Result<i32> {
    let cfg = FileCfg::load(args.config.as_deref())?;
    let source = resolve_source(&args.source, &cfg)?;
    let seed = pick_or(args.seed, &cfg, "seed", 0)?;
    let model = single_model(&source, seed)?;
    let lm = model.as_lm();
    let prompt = resolve_prompt(args.prompt, &cfg, lm.vocab().size())?;
    let strategy = pick_or(args.strategy, &cfg, "strategy", "reflection".into())?;
    let max_len = pick_or(args.max_len, &cfg, "max-len", 64)?;
    let sampling = resolve_sampling(args.k, args.p, args.temperature, &cfg)?;

    let trace = match strategy.as_str() {
        "greedy" => greedy_decode(lm, &prompt, max_len),
        "sample" => sample_decode(lm, &prompt, &sampling, max_len, seed)?,
        "beam" => {
            let width = pick_or(args.beam, &cfg, "beam", 4)?;
            let bcfg = BeamConfig { width, mode: BeamMode::RunToEos { max_len } };
            let (tokens, _) = beam_search(lm, &prompt, &bcfg, true)?;
            let terminated = match tokens.last() {
                Some(&t) if lm.vocab().is_eos(t) => Termination::Eos,
                _ => Termination::MaxLen,
            };
            trace_from_tokens(lm, &prompt, &tokens, terminated)
        }
        "reflection" => {
            let inner = match pick_or(args.inner, &cfg, "inner", "greedy".into())?.as_str() {
                "greedy" => InnerStrategy::Greedy,
                "sample" => InnerStrategy::Sampling(sampling),
                other => bail!("unknown inner decoder {other:?} (greedy | sample)"),
            };
            let rcfg = ReflectionConfig {
                sigma: pick_or(args.sigma, &cfg, "sigma", 0.5)?,
                d: pick_or(args.d, &cfg, "d", 4)?,
                beam_width: pick_or(args.beam, &cfg, "beam", 4)?,
                inner,
                max_len,
            };
            reflect_decode(lm, &prompt, &rcfg, seed)?
        }
        other => bail!("unknown strategy {other:?} (greedy | sample | beam | reflection)"),
    };
    emit(&serde_json::to_string_pretty(&trace)?)?;
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<i32> {
    let cfg = FileCfg::load(args.config.as_deref())?;
    let source = resolve_source(&args.source, &cfg)?;
    let seed = pick_or(args.seed, &cfg, "seed", 0)?;
    let model = single_model(&source, seed)?;
    let lm = model.as_lm();
    let prompt = resolve_prompt(args.prompt, &cfg, lm.vocab().size())?;
    let t = pick(args.t, &cfg, "T")?.ok_or_else(|| anyhow!("-T is required"))?;
    let budget = pick_or(args.budget, &cfg, "budget", DEFAULT_LEAF_BUDGET)?;

    let result = match pick_or(args.method, &cfg, "method", "bnb".into())?.as_str() {
        "bnb" => {
            let leaves = leaf_count(lm.vocab().size(), t);
            if leaves > budget as u128 {
                return Err(Error::Intractable { leaves, budget }.into());
            }
            global_optimum_bnb(lm, &prompt, t)
        }
        "exhaustive" => global_optimum_exhaustive(lm, &prompt, t, budget)?,
        other => bail!("unknown method {other:?} (bnb | exhaustive)"),
    };
    emit(&format!("[{}] logprob={:.6}", format_tokens(&result.tokens), result.logprob.value()))?;
    Ok(0)
}

fn cmd_theorem(args: TheoremArgs) -> Result<i32> {
    let cfg = FileCfg::load(args.config.as_deref())?;
    maybe_workers(args.workers, &cfg)?;
    let source = resolve_source(&args.source, &cfg)?;
    let t = pick(args.t, &cfg, "T")?.ok_or_else(|| anyhow!("-T is required"))?;
    let instances = pick_or(args.instances, &cfg, "instances", 1)?;
    let seed = pick_or(args.seed, &cfg, "seed", 0)?;
    let budget = pick_or(args.budget, &cfg, "budget", DEFAULT_LEAF_BUDGET)?;
    let prompt = match pick(args.prompt, &cfg, "prompt")? {
        Some(text) => checked_tokens(&text, source.vocab_size()?)?,
        None => Vec::new(),
    };

    let start = Instant::now();
    let (reports, summary) = theorem_sweep(&source, &prompt, t, instances, seed, budget)?;
    eprintln!("checked {} instances in {:.2}s", instances, start.elapsed().as_secs_f64());

    match pick(args.out, &cfg, "out")? {
        Some(path) => write_jsonl(&path, &reports)?,
        None => {
            for report in &reports {
                emit(&serde_json::to_string(report)?)?;
            }
        }
    }
    emit(&serde_json::to_string(&summary)?)?;
    Ok(if summary.violations > 0 { 1 } else { 0 })
}

fn cmd_curve(args: CurveArgs) -> Result<i32> {
    let cfg = FileCfg::load(args.config.as_deref())?;
    maybe_workers(args.workers, &cfg)?;
    let source = resolve_source(&args.source, &cfg)?;
    let seed = pick_or(args.seed, &cfg, "seed", 0)?;
    let out: PathBuf = pick(args.out, &cfg, "out")?.ok_or_else(|| anyhow!("--out FILE is required"))?;
    let t_spec = pick(args.t, &cfg, "T")?.ok_or_else(|| anyhow!("--T is required (e.g. 1..8 or 1,2,4)"))?;
    let sampling = resolve_sampling(args.k, args.p, args.temperature, &cfg)?;
    let prompt = match pick(args.prompt, &cfg, "prompt")? {
        Some(text) => vec![checked_tokens(&text, source.vocab_size()?)?],
        None => Vec::new(),
    };
    let sampled_history = args.sampled_history || cfg.get::<bool>("sampled-history")?.unwrap_or(false);

    let spec = CurveSpec {
        source,
        prompts: prompt,
        offsets: parse_offsets(&pick_or(args.offsets, &cfg, "offsets", "0".into())?)?,
        t_values: parse_t_values(&t_spec)?,
        proxy: parse_proxy(&pick_or(args.proxy, &cfg, "proxy", "exact".into())?)?,
        trials: pick_or(args.trials, &cfg, "trials", 100)?,
        seed,
        sampled_history: sampled_history.then_some(sampling),
        budget: pick_or(args.budget, &cfg, "budget", DEFAULT_LEAF_BUDGET)?,
    };
    let start = Instant::now();
    let points = run_curve(&spec)?;
    eprintln!("swept {} points in {:.2}s", points.len(), start.elapsed().as_secs_f64());

    let rows: Vec<CurveRow> = points
        .iter()
        .map(|p| CurveRow { offset: p.offset, t: p.t, fraction: p.fraction, trials: p.trials, seed })
        .collect();
    write_curve(&out, &rows)?;
    emit(&format!("wrote {} rows to {}", rows.len(), out.display()))?;
    Ok(0)
}

fn cmd_compare(args: CompareArgs) -> Result<i32> {
    let cfg = FileCfg::load(args.config.as_deref())?;
    let source = resolve_source(&args.source, &cfg)?;
    let seed = pick_or(args.seed, &cfg, "seed", 0)?;
    let model = single_model(&source, seed)?;
    let lm = model.as_lm();
    let prompt = resolve_prompt(args.prompt, &cfg, lm.vocab().size())?;
    let t = pick(args.t, &cfg, "T")?.ok_or_else(|| anyhow!("-T is required"))?;
    let out: PathBuf = pick(args.out, &cfg, "out")?.ok_or_else(|| anyhow!("--out FILE is required"))?;
    let sampling = resolve_sampling(args.k, args.p, args.temperature, &cfg)?;
    let beam_width = pick_or(args.beam, &cfg, "beam", 4)?;
    let reflection = ReflectionConfig {
        sigma: pick_or(args.sigma, &cfg, "sigma", 0.5)?,
        d: pick_or(args.d, &cfg, "d", 4)?,
        beam_width,
        inner: InnerStrategy::Greedy,
        max_len: t,
    };
    let specs = parse_strategies(
        &pick_or(args.strategies, &cfg, "strategies", "greedy,sample,beam,reflection".into())?,
        sampling,
        &reflection,
        beam_width,
    )?;

    let rows = compare_strategies(lm, &prompt, t, &specs, seed)?;
    for row in &rows {
        eprintln!("{}: {:.3}ms", row.strategy, row.wall_time * 1e3);
    }
    write_jsonl(&out, &rows)?;
    emit(&format!("wrote {} rows to {}", rows.len(), out.display()))?;
    Ok(0)
}

fn cmd_train_ngram(args: TrainNgramArgs) -> Result<i32> {
    let cfg = FileCfg::load(args.config.as_deref())?;
    let corpus: PathBuf =
        pick(args.corpus, &cfg, "corpus")?.ok_or_else(|| anyhow!("--corpus FILE is required"))?;
    let n = pick(args.n, &cfg, "n")?.ok_or_else(|| anyhow!("-n is required"))?;
    let alpha = pick_or(args.alpha, &cfg, "alpha", 1.0)?;
    let vocab_size =
        pick(args.vocab_size, &cfg, "vocab-size")?.ok_or_else(|| anyhow!("--vocab-size is required"))?;
    let out: PathBuf = pick(args.out, &cfg, "out")?.ok_or_else(|| anyhow!("--out FILE is required"))?;
    let vocab = match pick(args.eos, &cfg, "eos")? {
        Some(id) => {
            if id as usize >= vocab_size {
                return Err(Error::TokenOutOfRange { token: id, vocab_size }.into());
            }
            Vocabulary::with_eos(vocab_size, TokenId(id))
        }
        None => Vocabulary::new(vocab_size),
    };

    let text = std::fs::read_to_string(&corpus)
        .with_context(|| format!("reading corpus {}", corpus.display()))?;
    let mut sequences: Vec<TokenSeq> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let tokens = checked_tokens(line.trim(), vocab_size)
            .with_context(|| format!("corpus line {}", i + 1))?;
        sequences.push(tokens);
    }
    let model = NGramLm::train(vocab, n, alpha, &sequences)?;
    save_model(&out, &Model::from(model))?;
    emit(&format!("trained {n}-gram on {} sequences -> {}", sequences.len(), out.display()))?;
    Ok(0)
}

// ── Entry ──

fn exit_code_for(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(Error::Intractable { .. }) = cause.downcast_ref::<Error>() {
            return 3;
        }
    }
    2
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decode(args) => cmd_decode(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Theorem(args) => cmd_theorem(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Compare(args) => cmd_compare(args),
        Command::TrainNgram(args) => cmd_train_ngram(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit_code_for(&e));
        }
    }
}
