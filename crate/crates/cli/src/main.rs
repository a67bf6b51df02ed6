//! `freqprint` command-line tool.

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use freqprint::config::Config;
use freqprint::pipeline::{ModelKind, PipelineKind};

/// Application fingerprinting from DVFS and EM side-channel traces.
#[derive(Debug, Parser)]
#[command(name = "freqprint", version)]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

/// Where feature rows come from.
#[derive(Debug, Args)]
struct Source {
    /// Corpus directory written by `generate`; without it the configured
    /// corpus is simulated in memory.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the configured corpus and write it to disk.
    Generate {
        /// Result directory; must not exist yet or be empty.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one classifier on a stratified split and score the held-out part.
    Train {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "dvfs-freq")]
        pipeline: PipelineKind,
        #[arg(long, default_value = "rf")]
        model: ModelKind,
        /// Result directory; must not exist yet or be empty.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a directory written by `train` on every trace of a corpus, or,
    /// without `--trained`, tabulate split accuracy for each pipeline and model.
    Evaluate {
        #[command(flatten)]
        source: Source,
        /// Directory written by `train`.
        #[arg(long)]
        trained: Option<PathBuf>,
        /// Pipelines to tabulate; defaults to the DVFS pipelines, plus EM when
        /// the corpus carries EM captures.
        #[arg(long, value_delimiter = ',')]
        pipeline: Vec<PipelineKind>,
        /// Models to tabulate; defaults to all three.
        #[arg(long, value_delimiter = ',')]
        model: Vec<ModelKind>,
        /// Result directory; must not exist yet or be empty.
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy against the number of observed windows, and per-app detection time.
    DetectLatency {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "dvfs-freq")]
        pipeline: PipelineKind,
        #[arg(long, default_value = "rf")]
        model: ModelKind,
        /// Per-app accuracy that counts as detected; overrides the configuration.
        #[arg(long)]
        threshold: Option<f64>,
        /// Result directory; must not exist yet or be empty.
        #[arg(long)]
        out: PathBuf,
    },
    /// Hold some apps out of training and sweep the rejection threshold.
    Openset {
        #[command(flatten)]
        source: Source,
        /// Labels to hold out; overrides the configuration.
        #[arg(long, value_delimiter = ',')]
        holdout: Vec<String>,
        #[arg(long, default_value = "dvfs-freq")]
        pipeline: PipelineKind,
        #[arg(long, default_value = "rf")]
        model: ModelKind,
        /// Decision thresholds; overrides the configuration.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        /// Result directory; must not exist yet or be empty.
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe a corpus directory, a trained-model directory, a model or PCA
    /// file, or a configuration file.
    Inspect { path: PathBuf },
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("FREQPRINT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("FREQPRINT_THREADS must be a positive integer, got `{value}`"))?;
    anyhow::ensure!(n > 0, "FREQPRINT_THREADS must be a positive integer, got `{value}`");
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let config = load_config(&cli)?;
    match cli.command {
        Command::Generate { out } => commands::generate(&config, &out),
        Command::Train {
            source,
            pipeline,
            model,
            out,
        } => commands::train(&config, source.corpus.as_deref(), pipeline, model, &out),
        Command::Evaluate {
            source,
            trained: Some(trained),
            out,
            ..
        } => commands::evaluate_trained(&config, source.corpus.as_deref(), &trained, &out),
        Command::Evaluate {
            source,
            trained: None,
            pipeline,
            model,
            out,
        } => commands::evaluate_grid(&config, source.corpus.as_deref(), &pipeline, &model, &out),
        Command::DetectLatency {
            source,
            pipeline,
            model,
            threshold,
            out,
        } => {
            let mut config = config;
            if let Some(t) = threshold {
                config.detect.accuracy_threshold = t;
            }
            commands::detect_latency(&config, source.corpus.as_deref(), pipeline, model, &out)
        }
        Command::Openset {
            source,
            holdout,
            pipeline,
            model,
            thresholds,
            out,
        } => {
            let mut config = config;
            if !holdout.is_empty() {
                config.openset.holdout = holdout;
            }
            if !thresholds.is_empty() {
                config.openset.thresholds = thresholds;
            }
            commands::openset(&config, source.corpus.as_deref(), pipeline, model, &out)
        }
        Command::Inspect { path } => commands::inspect(&path),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
