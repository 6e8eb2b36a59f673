//! `diffudec` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 for
//! filesystem errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffudec::denoiser::{CorpusConfig, DenoiserKind, ProfileConfig};
use diffudec::harness::plot::{plot_dir, PlotKind};
use diffudec::harness::{analyze, run_sweep, SweepConfig, SweepData, SEED_ENV};
use diffudec::{decode_ar, decode_utterance, Corpus, Error, StrategyConfig};

#[derive(Parser)]
#[command(name = "diffudec", version, about = "Token-commitment strategy laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (JSONL plus a `.meta.json` sidecar).
    GenCorpus(GenCorpusArgs),
    /// Decode one utterance and print its trace as JSON.
    Decode(DecodeArgs),
    /// Run a full sweep and write the raw CSV results.
    Sweep(SweepArgs),
    /// Summarize one or more sweep directories into analysis tables.
    Analyze(AnalyzeArgs),
    /// Render SVG charts from analysis tables.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    NoisyChannel,
    Skewed,
    Dispersed,
}

#[derive(Args)]
struct GenCorpusArgs {
    /// JSON corpus config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of utterances.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    model: Option<ModelArg>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Utterance id; defaults to the first utterance.
    #[arg(long)]
    id: Option<String>,
    /// `fixed:K`, `static:C`, `dynamic:F` or `ar`.
    #[arg(long, default_value = "static:0.9")]
    strategy: String,
    #[arg(long, default_value_t = 32)]
    block: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Sweep output directory; repeat to combine several sweeps.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also pick, per strategy family, the point closest to this RTF.
    #[arg(long)]
    target_rtf: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, default_value = "all")]
    kind: String,
    /// Directory written by `analyze`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn env_seed() -> diffudec::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| Error::Config(format!("{SEED_ENV}={v:?}: {e}"))),
        Err(_) => Ok(None),
    }
}

fn run(command: Command) -> diffudec::Result<()> {
    match command {
        Command::GenCorpus(args) => gen_corpus(args),
        Command::Decode(args) => decode(args),
        Command::Sweep(args) => {
            let mut cfg = SweepConfig::load(&args.config)?;
            cfg.apply_env()?;
            if let Some(out) = args.out {
                cfg.out_dir = out;
            }
            if args.threads == Some(0) {
                return Err(Error::InvalidArgument("--threads must be at least 1".into()));
            }
            let out = run_sweep(&cfg, args.threads)?;
            out.write(&cfg.out_dir)?;
            eprintln!("{} runs written to {}", out.records.len(), cfg.out_dir.display());
            Ok(())
        }
        Command::Analyze(args) => {
            let inputs = args
                .input
                .iter()
                .map(|p| SweepData::read(p))
                .collect::<diffudec::Result<Vec<_>>>()?;
            analyze(&inputs, args.target_rtf)?.write(&args.out)
        }
        Command::Plot(args) => {
            let kind: PlotKind = args.kind.parse()?;
            let paths = plot_dir(kind, &args.input, &args.out)?;
            let lines: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
            emit(&lines.join("\n"))
        }
    }
}

fn gen_corpus(args: GenCorpusArgs) -> diffudec::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str::<CorpusConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => CorpusConfig::default(),
    };
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n {
        cfg.num_utterances = n;
    }
    if let Some(v) = args.vocab_size {
        cfg.vocab_size = v;
    }
    match args.model {
        Some(ModelArg::NoisyChannel) => cfg.denoiser = DenoiserKind::NoisyChannel,
        Some(ModelArg::Skewed) => cfg.denoiser = DenoiserKind::Profile(ProfileConfig::SKEWED),
        Some(ModelArg::Dispersed) => cfg.denoiser = DenoiserKind::Profile(ProfileConfig::DISPERSED),
        None => {}
    }
    let corpus = Corpus::generate(cfg)?;
    corpus.save(&args.out)?;
    eprintln!("{} utterances written to {}", corpus.utterances.len(), args.out.display());
    Ok(())
}

fn decode(args: DecodeArgs) -> diffudec::Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let utterance = match &args.id {
        Some(id) => corpus
            .utterances
            .iter()
            .find(|u| &u.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no utterance with id {id:?}")))?,
        None => corpus
            .utterances
            .first()
            .ok_or_else(|| Error::InvalidArgument("corpus is empty".into()))?,
    };
    let denoiser = corpus.build_denoiser()?;
    let trace = if args.strategy == "ar" {
        decode_ar(utterance, &denoiser)?
    } else {
        let strategy: StrategyConfig = args.strategy.parse()?;
        decode_utterance(utterance, &denoiser, &strategy, args.block)?
    };
    let json = serde_json::to_string_pretty(&trace)
        .map_err(|e| Error::InvariantViolation(e.to_string()))?;
    emit(&json)
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) -> diffudec::Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}
