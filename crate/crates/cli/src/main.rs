//! `rafhgr`: generate synthetic recordings, extract features, train and
//! evaluate the GRU classifier, benchmark the pipelines and dump debug data.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rafhgr_core::bench::PipelineVariant;
use rafhgr_core::Error;

#[derive(Parser, Debug)]
#[command(name = "rafhgr", version, about = "FFT-free radar hand-gesture recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a labeled RAFD dataset and its split index.
    Generate(GenerateArgs),
    /// Extract per-frame features and fit the scaler on the train split.
    Features(FeaturesArgs),
    /// Train one GRU per seed.
    Train(TrainArgs),
    /// Evaluate trained models on the test split.
    Eval(EvalArgs),
    /// Compare the RAF pipeline with the FFT baselines.
    Bench(BenchArgs),
    /// Dump the spike raster and features of one recording.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Recordings per class; Background gets the same number.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Noise standard deviation relative to the hand amplitude scale.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 100)]
    pub frames: usize,
    /// Split index path (default: <out stem>.split.json).
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Detector {
    /// RAF neuron bank (Goertzel features).
    Raf,
    /// Range-FFT threshold (Goertzel features).
    Fft,
    /// Range-FFT threshold with Doppler-FFT features.
    FftFft,
}

impl Detector {
    pub fn variant(self) -> PipelineVariant {
        match self {
            Detector::Raf => PipelineVariant::RafGoertzel,
            Detector::Fft => PipelineVariant::FftDetectGoertzel,
            Detector::FftFft => PipelineVariant::FftDetectFftFeatures,
        }
    }
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scaler: PathBuf,
    #[arg(long, value_enum, default_value = "raf")]
    pub detector: Detector,
    /// Split index path (default: <in stem>.split.json).
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub scaler: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// Output directory for models, logs and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1.58e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.6e-5)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 150)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// Scaler (default: scaler.json inside the models directory).
    #[arg(long)]
    pub scaler: Option<PathBuf>,
    /// Directory for the confusion matrices and report (default: models dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory with one trained-model subdirectory per variant
    /// (`raf`, `fft-goertzel`, `fft-fft`); enables the accuracy column.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_value = "raf,fft-goertzel,fft-fft")]
    pub variants: Vec<PipelineVariant>,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    /// Number of frames used for timing.
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    /// CSV output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub recording: usize,
    /// Output directory for raster.csv and features.csv.
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidArgument(_) => 2,
        Error::Numeric(_) => 4,
        _ => 3,
    }
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(value) = std::env::var("RAFR_THREADS") {
        let n: usize = value
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("RAFR_THREADS must be a positive integer, got '{value}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Features(a) => commands::features(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Inspect(a) => commands::inspect(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
