mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ttt", version, about = "Tweet-augmented traffic forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario (traffic, tweets, segments, manifest).
    Synth(SynthArgs),
    /// Turn a tweet corpus into per-segment feature channels.
    Features(FeaturesArgs),
    /// Detrending, lagged cross-correlation and the lagged OLS model.
    Correlate(CorrelateArgs),
    /// Train a forecaster and report test metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the oracle stub) on the test span.
    Evaluate(EvaluateArgs),
    /// Retrain with each tweet channel or the time encoder removed.
    Ablate(TrainArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scenario config (JSON). Omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario used when no config is given.
    #[arg(long, value_enum, default_value = "standard")]
    pub preset: Preset,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Preset {
    Standard,
    Accident,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TermFreqArg {
    Svd,
    Raw,
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub tweets: PathBuf,
    #[arg(long)]
    pub segments: PathBuf,
    /// Directory holding accident.txt and culture.txt; shipped lists otherwise.
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// Feature CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Take the time grid from this traffic CSV.
    #[arg(long, conflicts_with_all = ["start", "end"])]
    pub traffic: Option<PathBuf>,
    /// Grid start (ISO 8601), used with --end.
    #[arg(long, requires = "end")]
    pub start: Option<String>,
    /// Grid end, exclusive.
    #[arg(long, requires = "start")]
    pub end: Option<String>,
    /// CSV `site,segment_id` overriding geometric assignment.
    #[arg(long)]
    pub site_map: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub svd_k: usize,
    #[arg(long, default_value_t = 3)]
    pub min_count: u32,
    #[arg(long, default_value_t = 5.0)]
    pub radius_km: f64,
    #[arg(long, value_enum, default_value = "svd")]
    pub term_freq_mode: TermFreqArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub traffic: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub max_lag: usize,
    /// Also write SVG line charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory with traffic.csv and features.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Train,validation,test lengths in days.
    #[arg(long, default_value = "60,15,15")]
    pub split: String,
    /// Spacing between test windows.
    #[arg(long, default_value_t = 1)]
    pub test_stride: usize,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, required_unless_present = "oracle_stub")]
    pub checkpoint: Option<PathBuf>,
    /// Forecast the ground truth instead of running a model.
    #[arg(long)]
    pub oracle_stub: bool,
    /// Window lengths for the stub (a checkpoint carries its own).
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the split stored in the checkpoint, else 60,15,15.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub test_stride: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Features(a) => commands::features(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", report::error_line(&e));
            ExitCode::FAILURE
        }
    }
}
