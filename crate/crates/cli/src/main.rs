mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgespeech::Error;

/// EdgeSpeechNet keyword spotting: preprocessing, architecture checks,
/// training, evaluation, prediction, exploration and benchmarking.
#[derive(Debug, Parser)]
#[command(name = "esn", version)]
pub struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// WAV file to an ESMF feature file.
    Preprocess(PreprocessArgs),
    /// Per-layer parameter table against the reference counts.
    VerifyArch(ArchArgs),
    /// Train on a Speech Commands directory and write a checkpoint.
    Train(TrainArgs),
    /// Accuracy of a checkpoint on one split.
    Eval(EvalArgs),
    /// Label for one WAV file.
    Predict(PredictArgs),
    /// Search width variants of a prototype under resource requirements.
    Explore(ExploreArgs),
    /// Single-example inference latency.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ArchArgs {
    /// Built-in architecture: A, B, C or D.
    #[arg(long)]
    pub arch: Option<String>,
    /// Architecture spec JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Checkpoint path; the JSON sidecar is written next to it.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Defaults to the spec in the checkpoint sidecar.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: String,
    /// Exit with status 1 when accuracy is below this value.
    #[arg(long)]
    pub min_acc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorKind {
    /// Closed-form accuracy from bottleneck widths; no data needed.
    Synthetic,
    /// Short training run per candidate on --data-dir.
    Train,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    /// Prototype spec JSON file, or a built-in name (A, B, C, D).
    #[arg(long)]
    pub arch_prototype: String,
    #[arg(long, default_value_t = 0.95)]
    pub min_val_acc: f64,
    #[arg(long)]
    pub max_params: Option<u64>,
    #[arg(long)]
    pub max_macs: Option<u64>,
    #[arg(long, default_value_t = 5)]
    pub generations: usize,
    #[arg(long, default_value_t = 8)]
    pub per_gen: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = EvaluatorKind::Synthetic)]
    pub evaluator: EvaluatorKind,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Training epochs per candidate (train evaluator).
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    /// Re-train this many top candidates with --reverify-epochs.
    #[arg(long, default_value_t = 0)]
    pub reverify_top: usize,
    #[arg(long, default_value_t = 30)]
    pub reverify_epochs: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    /// Benchmark the batch-norm-folded network.
    #[arg(long)]
    pub fold: bool,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// Error paired with the process exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Verification or accuracy check failed; the message is already printed.
    Verify,
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify => EXIT_VERIFY,
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(e) => match e {
                Error::InvalidConfig(_) | Error::UnknownArchitecture(_) => EXIT_USAGE,
                Error::NoFeasibleCandidate { .. } => EXIT_VERIFY,
                _ => EXIT_IO,
            },
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("ESN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("ESN_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match configure_threads().and_then(|()| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verify => {}
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
