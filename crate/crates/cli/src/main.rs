//! `seld`: synthetic data, feature extraction, training and evaluation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seld_core::data::Stage;
use seld_core::model::Variant;
use seld_core::Error;

#[derive(Parser)]
#[command(name = "seld", version, about = "Sound event localization and detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic 4-channel scenes and their metadata.
    Synth(SynthArgs),
    /// Extract log-mel + GCC-PHAT features for every WAV in a dataset.
    Extract(ExtractArgs),
    /// Train one model variant on the stage's training folders.
    Train(TrainArgs),
    /// Score a checkpoint on the stage's test folders.
    Eval(EvalArgs),
    /// Print the events decoded from one WAV file.
    Infer(InferArgs),
    /// Train and score baseline, conv-residual and standard-post for each ratio.
    Gridsearch(GridArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    pub folders: u32,
    #[arg(long, default_value_t = 100)]
    pub files_per_folder: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Scene length in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Events per scene; defaults to one per 3 seconds.
    #[arg(long)]
    pub events: Option<usize>,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Dataset root holding `mic_dev/`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub segment_frames: usize,
}

#[derive(Args, Clone)]
pub struct RunArgs {
    #[arg(long, value_parser = parse_stage, default_value = "dev")]
    pub stage: Stage,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory written by `extract`.
    #[arg(long)]
    pub features: PathBuf,
    /// Directory of metadata CSVs (`metadata_dev/` under a synth root).
    #[arg(long)]
    pub metadata: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long)]
    pub ratio: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["checkpoint", "predictions"]))]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score existing prediction CSVs instead of running a model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_parser = parse_stage, default_value = "dev")]
    pub stage: Stage,
    /// Feature directory; required with `--checkpoint`.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub metadata: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub ratios: Vec<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// 3 for data and configuration problems, 4 for numeric failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Gridsearch(a) => commands::gridsearch(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
