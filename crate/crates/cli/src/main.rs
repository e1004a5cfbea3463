//! `memestream`: run, evaluate and sweep the stream clusterers.
//!
//! Exit codes: 0 on success, 2 on I/O failure, 64 on invalid usage, 1 on
//! any other error.

mod output;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use memestream::engine::{Algorithm, EngineConfig, FollowerGraph, Snapshot};
use memestream::eval::{evaluate_snapshot, GroundTruth};
use memestream::ingest::{read_records, Extractor, StopWords, TweetRecord};
use memestream::pipeline::{build_engine, run_stream, RunSummary};
use memestream::simil::{SimilarityMode, SimilarityWeights};
use memestream::synth::{follower_edges, generate, write_jsonl, SynthConfig};
use memestream::window::{WindowConfig, WindowModel};

use output::{MetricsWriter, RunManifest, SnapshotWriter};

/// Invalid flags or flag combinations.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "memestream", version, about = "Streaming meme clustering over tweet protomemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a JSONL tweet stream and score it when labels are present.
    Run(RunArgs),
    /// Score saved snapshots against labeled tweets.
    Eval(EvalArgs),
    /// Generate a synthetic labeled stream.
    Synth(SynthArgs),
    /// Run a grid of window lengths and step sizes.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Psc,
    B1,
    B2,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Max,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowModelArg {
    Sliding,
    Landmark,
    Damped,
}

/// Engine settings shared by `run` and `sweep`.
#[derive(Args, Clone)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "psc")]
    algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value = "max")]
    similarity: SimilarityArg,
    /// Linear weights as user,content,tweet,network. Defaults to equal weights.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2.0)]
    n_sigmas: f64,
    #[arg(long, default_value_t = 11)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Content weight of the b2 baseline.
    #[arg(long, default_value_t = 0.5)]
    b2_alpha: f64,
    #[arg(long, value_enum, default_value = "sliding")]
    window_model: WindowModelArg,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Hashtags (one per line) removed from extraction and text.
    #[arg(long)]
    blind_labels: Option<PathBuf>,
    /// Edge list `follower_id followee_id`, required by b2.
    #[arg(long)]
    follower_graph: Option<PathBuf>,
    /// Stopword list, one word per line. Defaults to the built-in English list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSONL input, one tweet per line in timestamp order.
    #[arg(long, required_unless_present = "manifest")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Step length in seconds.
    #[arg(long, default_value_t = 3600)]
    delta_t: i64,
    /// Window length in steps.
    #[arg(long, default_value_t = 6)]
    ell: u32,
    /// Repeat the run recorded in a manifest; other engine flags are ignored.
    #[arg(long, conflicts_with = "input")]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    snapshots: PathBuf,
    /// JSONL tweets carrying `labels`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also write a follower graph aligned with the meme communities.
    #[arg(long)]
    graph_out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    follows_per_user: usize,
    /// Share of follower edges that cross communities.
    #[arg(long, default_value_t = 0.0)]
    cross_prob: f64,
    #[arg(long)]
    n_memes: Option<usize>,
    #[arg(long)]
    tweets_per_meme_per_hour: Option<f64>,
    #[arg(long)]
    vocab_per_meme: Option<usize>,
    #[arg(long)]
    shared_vocab: Option<f64>,
    #[arg(long)]
    n_users_per_meme: Option<usize>,
    #[arg(long)]
    user_overlap: Option<f64>,
    #[arg(long)]
    mention_prob: Option<f64>,
    #[arg(long)]
    retweet_prob: Option<f64>,
    #[arg(long)]
    url_prob: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    duration_hours: Option<f64>,
    #[arg(long)]
    words_per_tweet: Option<usize>,
    #[arg(long)]
    start: Option<i64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Window lengths in steps.
    #[arg(long, value_delimiter = ',', required = true)]
    ells: Vec<u32>,
    /// Step lengths in seconds.
    #[arg(long, value_delimiter = ',', required = true)]
    delta_ts: Vec<i64>,
    #[command(flatten)]
    engine: EngineArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_IO;
        }
        if let Some(err) = cause.downcast_ref::<memestream::Error>() {
            match err {
                memestream::Error::Config(_) => return EXIT_USAGE,
                memestream::Error::Io(_) => return EXIT_IO,
                _ => {}
            }
        }
    }
    1
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn engine_config(args: &EngineArgs, delta_t: i64, ell: u32) -> Result<EngineConfig<f64>> {
    let similarity = match (args.similarity, &args.weights) {
        (SimilarityArg::Max, None) => SimilarityMode::Max,
        (SimilarityArg::Max, Some(_)) => return Err(usage("--weights requires --similarity linear")),
        (SimilarityArg::Linear, None) => SimilarityMode::Linear(SimilarityWeights::equal()),
        (SimilarityArg::Linear, Some(w)) => {
            SimilarityMode::Linear(SimilarityWeights::new(w[0], w[1], w[2], w[3]).map_err(|e| usage(e.to_string()))?)
        }
    };
    let algorithm = match args.algorithm {
        AlgorithmArg::Psc => Algorithm::Psc,
        AlgorithmArg::B1 => Algorithm::B1,
        AlgorithmArg::B2 => Algorithm::B2,
    };
    if algorithm == Algorithm::B2 && args.follower_graph.is_none() {
        return Err(usage("--algorithm b2 requires --follower-graph"));
    }
    let model = match args.window_model {
        WindowModelArg::Sliding => WindowModel::Sliding,
        WindowModelArg::Landmark => WindowModel::Landmark,
        WindowModelArg::Damped => WindowModel::Damped,
    };
    let cfg = EngineConfig {
        k: args.k,
        n_sigmas: args.n_sigmas,
        window: WindowConfig {
            delta_t,
            ell,
            lambda: args.lambda,
            model,
        },
        similarity,
        algorithm,
        b2_alpha: args.b2_alpha,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// Input files of one run, as recorded in the manifest.
struct Inputs {
    input: PathBuf,
    stopwords: Option<PathBuf>,
    blind_labels: Option<PathBuf>,
    follower_graph: Option<PathBuf>,
}

impl Inputs {
    fn from_args(input: PathBuf, args: &EngineArgs) -> Self {
        Self {
            input,
            stopwords: args.stopwords.clone(),
            blind_labels: args.blind_labels.clone(),
            follower_graph: args.follower_graph.clone(),
        }
    }

    fn extractor(&self) -> Result<Arc<Extractor>> {
        let stopwords = match &self.stopwords {
            Some(p) => StopWords::from_file(p).with_context(|| format!("cannot read stopwords {}", p.display()))?,
            None => StopWords::english(),
        };
        let mut extractor = Extractor::new(stopwords);
        if let Some(p) = &self.blind_labels {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let tags: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            extractor = extractor.with_blind_hashtags(tags);
        }
        Ok(Arc::new(extractor))
    }

    fn graph(&self) -> Result<Option<Arc<FollowerGraph>>> {
        let Some(p) = &self.follower_graph else {
            return Ok(None);
        };
        let graph = FollowerGraph::parse(output::open(p)?).with_context(|| format!("in {}", p.display()))?;
        Ok(Some(Arc::new(graph)))
    }
}

/// Streams records, skipping malformed lines with a warning.
fn records<'a>(
    path: &Path,
    malformed: &'a mut u64,
) -> Result<impl Iterator<Item = memestream::Result<TweetRecord>> + 'a> {
    let reader = output::open(path)?;
    Ok(read_records(reader).filter_map(move |r| match r {
        Err(memestream::Error::Io(e)) => Some(Err(memestream::Error::Io(e))),
        Err(e) => {
            warn!("skipping record: {e}");
            *malformed += 1;
            None
        }
        Ok(r) => Some(Ok(r)),
    }))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (cfg, inputs) = match &args.manifest {
        Some(m) => {
            let manifest = RunManifest::load(m)?;
            let inputs = Inputs {
                input: manifest.input,
                stopwords: manifest.stopwords,
                blind_labels: manifest.blind_labels,
                follower_graph: manifest.follower_graph,
            };
            manifest.config.validate().map_err(|e| usage(e.to_string()))?;
            (manifest.config, inputs)
        }
        None => {
            let input = args.input.clone().expect("clap enforces --input");
            let cfg = engine_config(&args.engine, args.delta_t, args.ell)?;
            (cfg, Inputs::from_args(input, &args.engine))
        }
    };
    if cfg.algorithm == Algorithm::B2 && inputs.follower_graph.is_none() {
        return Err(usage("--algorithm b2 requires --follower-graph"));
    }
    let extractor = inputs.extractor()?;
    let graph = inputs.graph()?;
    let mut engine = build_engine(&cfg, extractor, graph).map_err(|e| usage(e.to_string()))?;
    if !inputs.input.is_file() {
        return Err(anyhow::Error::new(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("cannot read input {}", inputs.input.display()),
        )));
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;

    let mut snapshots = SnapshotWriter::create(&args.out)?;
    let mut metrics = MetricsWriter::new(&args.out);
    let mut malformed = 0;
    let summary = run_stream(
        engine.as_mut(),
        &cfg.window,
        records(&inputs.input, &mut malformed)?,
        |snapshot, eval| {
            snapshots.write(snapshot).map_err(write_error)?;
            if let Some(e) = eval {
                metrics.write(e).map_err(write_error)?;
            }
            Ok(())
        },
    )
    ?;
    snapshots.finish()?;
    let mut outputs = vec![output::SNAPSHOTS.to_string()];
    outputs.extend(metrics.finish()?);
    outputs.push(output::MANIFEST.into());

    RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        rng_seed: cfg.seed,
        config: cfg,
        input: inputs.input,
        stopwords: inputs.stopwords,
        blind_labels: inputs.blind_labels,
        follower_graph: inputs.follower_graph,
        outputs,
        lfk_variant: "mean".into(),
    }
    .write(&args.out)?;
    report(&summary, malformed);
    Ok(())
}

/// Carries an output failure through the engine callback as an I/O error.
fn write_error(e: anyhow::Error) -> memestream::Error {
    memestream::Error::Io(std::io::Error::other(format!("{e:#}")))
}

fn report(s: &RunSummary, malformed: u64) {
    info!(
        "{} windows ({} unscored), {} tweets clustered, {} late, {} outside their step, {} malformed",
        s.windows, s.unscored, s.engine.tweets, s.late, s.engine.rejected, malformed
    );
    if s.late + s.engine.rejected + malformed > 0 {
        warn!(
            "skipped {} late, {} out-of-step and {} malformed records",
            s.late, s.engine.rejected, malformed
        );
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut malformed = 0;
    let mut truth = GroundTruth::new();
    for r in records(&args.truth, &mut malformed)? {
        let r = r?;
        truth.insert(&r.tweet.id, r.labels);
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut metrics = MetricsWriter::new(&args.out);
    for (i, line) in output::open(&args.snapshots)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let snapshot: Snapshot = serde_json::from_str(&line)
            .with_context(|| format!("{}: line {}", args.snapshots.display(), i + 1))?;
        match evaluate_snapshot::<f64>(&snapshot, &truth)? {
            Some(e) => metrics.write(&e)?,
            None => warn!("window {}: no labeled tweet in any cluster, skipped", snapshot.window_end),
        }
    }
    metrics.finish()?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_memes: args.n_memes.unwrap_or(d.n_memes),
        tweets_per_meme_per_hour: args.tweets_per_meme_per_hour.unwrap_or(d.tweets_per_meme_per_hour),
        vocab_per_meme: args.vocab_per_meme.unwrap_or(d.vocab_per_meme),
        shared_vocab: args.shared_vocab.unwrap_or(d.shared_vocab),
        n_users_per_meme: args.n_users_per_meme.unwrap_or(d.n_users_per_meme),
        user_overlap: args.user_overlap.unwrap_or(d.user_overlap),
        mention_prob: args.mention_prob.unwrap_or(d.mention_prob),
        retweet_prob: args.retweet_prob.unwrap_or(d.retweet_prob),
        url_prob: args.url_prob.unwrap_or(d.url_prob),
        noise_tweet_fraction: args.noise.unwrap_or(d.noise_tweet_fraction),
        duration_hours: args.duration_hours.unwrap_or(d.duration_hours),
        words_per_tweet: args.words_per_tweet.unwrap_or(d.words_per_tweet),
        start: args.start.unwrap_or(d.start),
        rng_seed: args.seed.unwrap_or(d.rng_seed),
    };
    let records = generate(&cfg).map_err(|e| usage(e.to_string()))?;
    let mut out = output::create(&args.out)?;
    write_jsonl(&mut out, &records)?;
    std::io::Write::flush(&mut out)?;
    if let Some(path) = &args.graph_out {
        let edges = follower_edges(&cfg, args.follows_per_user, args.cross_prob).map_err(|e| usage(e.to_string()))?;
        let mut g = output::create(path)?;
        for (a, b) in edges {
            std::io::Write::write_all(&mut g, format!("{a} {b}\n").as_bytes())?;
        }
        std::io::Write::flush(&mut g)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    ell: u32,
    delta_t: i64,
    window_seconds: i64,
    windows: u64,
    scored_windows: usize,
    mean_lfk_nmi: f64,
    mean_nmi: f64,
    cum_nmi: f64,
}

fn sweep_cell(cfg: EngineConfig<f64>, inputs: &Inputs) -> Result<SweepRow> {
    let mut engine = build_engine(&cfg, inputs.extractor()?, inputs.graph()?)?;
    let mut lfk = Vec::new();
    let mut nmi = Vec::new();
    let mut malformed = 0;
    let summary = run_stream(
        engine.as_mut(),
        &cfg.window,
        records(&inputs.input, &mut malformed)?,
        |_, e| {
            if let Some(e) = e {
                lfk.push(e.lfk_nmi);
                nmi.push(e.nmi);
            }
            Ok(())
        },
    )?;
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(SweepRow {
        ell: cfg.window.ell,
        delta_t: cfg.window.delta_t,
        window_seconds: cfg.window.span(),
        windows: summary.windows,
        scored_windows: nmi.len(),
        mean_lfk_nmi: mean(&lfk),
        mean_nmi: mean(&nmi),
        cum_nmi: nmi.iter().sum(),
    })
}

fn sweep_threads() -> Result<Option<usize>> {
    match std::env::var("MEMESTREAM_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| usage(format!("MEMESTREAM_THREADS must be a positive integer, got {v:?}")))?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut cells = Vec::new();
    for &ell in &args.ells {
        for &delta_t in &args.delta_ts {
            cells.push(engine_config(&args.engine, delta_t, ell)?);
        }
    }
    let inputs = Inputs::from_args(args.input.clone(), &args.engine);
    // Fail early on unreadable inputs rather than once per cell.
    output::open(&inputs.input)?;
    inputs.extractor()?;
    inputs.graph()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep_threads()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("cannot start worker threads")?;
    let rows: Vec<Result<SweepRow>> = pool.install(|| cells.into_par_iter().map(|cfg| sweep_cell(cfg, &inputs)).collect());

    let mut by_cell = BTreeMap::new();
    let mut w = csv::Writer::from_path(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    for row in rows {
        let row = row?;
        by_cell.insert((row.ell, row.delta_t), row.mean_nmi);
        w.serialize(row)?;
    }
    w.flush()?;
    if let Some(((ell, dt), best)) = by_cell.iter().max_by(|a, b| a.1.total_cmp(b.1)) {
        info!("best cell: ell={ell} delta_t={dt}s mean NMI {best:.4}");
    }
    Ok(())
}
