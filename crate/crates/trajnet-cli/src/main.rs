//! `trajnet` — train, evaluate, and dissect convolutional trajectory-space
//! motion prediction models from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
//! divergence. Errors print a single machine-readable line to stderr of the
//! form `error[<category>]: <message>`. Log verbosity is controlled by the
//! `TRAJNET_LOG` environment variable (default `info`).

mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use trajnet::eval::MetricKind;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "trajnet", version, about = "Convolutional trajectory-space human motion prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (default: trajnet-out/<command>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override every seed in the configuration (model init, training, synthesis).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Swap the base model for a named variant cell
    /// (WS, RS, WGCOT-1, RGCOT-1, WGCOT-4, RGCOT-4, WSRC, RSRC).
    #[arg(long, global = true, value_name = "CELL")]
    ablation: Option<String>,

    /// Prediction horizon: short = 10 future frames, long = 25.
    #[arg(long, global = true, value_enum)]
    horizon: Option<Horizon>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic motion dataset plus manifest.
    GenSynth,
    /// Train the configured model on a manifest split and save a checkpoint.
    Train {
        /// Continue from this checkpoint instead of initializing fresh.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint against a manifest split.
    Eval {
        /// Trained model to evaluate.
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: PathBuf,
        /// Manifest to evaluate on (default: data.manifest from the config).
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        /// Split name within the manifest (default: data.eval_split).
        #[arg(long, value_name = "NAME")]
        split: Option<String>,
    },
    /// Predict the future of one observed sequence file.
    Predict {
        /// Trained model to predict with.
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: PathBuf,
        /// Observed sequence (trajseq text or binary) of exactly the model's
        /// observed length.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
    },
    /// Print the layer table, receptive fields, and coverage verdict.
    Inspect {
        /// Inspect a trained checkpoint instead of the configured model.
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: Option<PathBuf>,
    },
    /// Train and score every named variant cell into one comparison table.
    Ablate {
        /// Metric used for the sweep table columns.
        #[arg(long, value_enum, default_value_t = Metric::Mpjpe)]
        metric: Metric,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenSynth => "gen-synth",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Predict { .. } => "predict",
            Command::Inspect { .. } => "inspect",
            Command::Ablate { .. } => "ablate",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Horizon {
    /// 10 future frames (400 ms at 25 fps).
    Short,
    /// 25 future frames (1000 ms at 25 fps).
    Long,
}

impl Horizon {
    fn frames(self) -> usize {
        match self {
            Horizon::Short => 10,
            Horizon::Long => 25,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Mpjpe,
    Mse,
    Mae,
}

impl Metric {
    fn kind(self) -> MetricKind {
        match self {
            Metric::Mpjpe => MetricKind::MpjpeMm,
            Metric::Mse => MetricKind::MseM2,
            Metric::Mae => MetricKind::MaeM,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::load(cli.config.as_deref())?;
    config::apply_overrides(&mut cfg, cli.seed, cli.ablation.as_deref())?;
    // For commands that build a model from the config, --horizon picks the
    // prediction length; eval instead bounds the scoring horizon of an
    // already-trained checkpoint, and predict always uses the checkpoint's.
    if matches!(
        cli.command,
        Command::GenSynth | Command::Train { .. } | Command::Inspect { .. } | Command::Ablate { .. }
    ) {
        if let Some(h) = cli.horizon {
            cfg.model.output_frames = h.frames();
        }
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("trajnet-out").join(cli.command.name()));

    match &cli.command {
        Command::GenSynth => commands::cmd_gen_synth(&cfg, &out),
        Command::Train { resume } => commands::cmd_train(&cfg, &out, resume.as_deref()),
        Command::Eval { checkpoint, manifest, split } => commands::cmd_eval(
            &cfg,
            &out,
            checkpoint,
            manifest.as_deref(),
            split.as_deref(),
            cli.horizon.map(Horizon::frames),
        ),
        Command::Predict { checkpoint, input } => commands::cmd_predict(&cfg, &out, checkpoint, input),
        Command::Inspect { checkpoint } => commands::cmd_inspect(&cfg, &out, checkpoint.as_deref()),
        Command::Ablate { metric } => commands::cmd_ablate(&cfg, &out, metric.kind()),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRAJNET_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
