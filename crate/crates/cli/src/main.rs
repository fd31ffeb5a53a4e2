use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Stochastic frequency masking and degradation tools.
#[derive(Parser)]
#[command(name = "sfm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the orthonormal DCT-II of an image as CSV (row, col, channel, value).
    Dct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo masking probability per radial bin against its closed form.
    MaskStats(MaskStatsArgs),
    /// Apply SFM to an image or a directory of images.
    Sfm(SfmArgs),
    /// Blur, downsample and add noise to every image in a directory.
    Degrade(DegradeArgs),
    /// Average radial PSD over a directory of images.
    Psd {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        /// Apply a separable Hann window before the transform.
        #[arg(long)]
        hann: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// SNR-versus-frequency curves of a power-law signal in white noise.
    Snr {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Noise variance; repeat or comma-separate for several curves.
        #[arg(long, value_delimiter = ',', required = true)]
        sigma2: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Batch processing driven by a config file.
    Pipeline {
        #[command(subcommand)]
        action: PipelineAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Central,
    Targeted,
}

#[derive(Args)]
struct MaskStatsArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Raster size as HxW, e.g. 64x64.
    #[arg(long)]
    dims: String,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Targeted centre radius as a fraction of r_max.
    #[arg(long, default_value_t = sfm_core::sfm::DEFAULT_TARGET_CENTER)]
    rc: f64,
    /// Targeted half-normal scale as a fraction of r_max.
    #[arg(long, default_value_t = sfm_core::sfm::DEFAULT_TARGET_SIGMA)]
    sd: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SfmArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = sfm_core::sfm::DEFAULT_TARGET_CENTER)]
    rc: f64,
    #[arg(long, default_value_t = sfm_core::sfm::DEFAULT_TARGET_SIGMA)]
    sd: f64,
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Clamp masked output to the nominal range before saving.
    #[arg(long)]
    clamp: bool,
    #[arg(long, default_value = "png8")]
    format: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// identity, bicubic or gaussian:SIGMA
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    scale: usize,
    /// none, awgn:S, awgn-blind:LO,HI or pg:GAIN,READ
    #[arg(long, default_value = "none")]
    noise: String,
    #[arg(long, default_value = "png8")]
    format: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PipelineAction {
    /// Run a batch. Flags override the matching config entries.
    Run(RunArgs),
    /// Re-derive a run from its manifest and compare hashes.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    rc: Option<f64>,
    #[arg(long)]
    sd: Option<f64>,
    #[arg(long)]
    clamp: bool,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long)]
    noise: Option<String>,
    /// Worker threads (0 = one per core). Does not affect outputs.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

/// Why a command stopped. Maps onto the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration (exit 2).
    Config(String),
    /// Some inputs could not be processed (exit 1).
    Partial(String),
    /// The command could not run at all (exit 1).
    Runtime(String),
}

impl From<sfm_core::Error> for Failure {
    fn from(e: sfm_core::Error) -> Self {
        match e {
            sfm_core::Error::Config(_) | sfm_core::Error::InvalidArgument(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dct { input, out } => commands::dct(&input, &out),
        Command::MaskStats(a) => commands::mask_stats(&a),
        Command::Sfm(a) => commands::sfm(&a),
        Command::Degrade(a) => commands::degrade(&a),
        Command::Psd {
            input,
            bins,
            hann,
            out,
        } => commands::psd(&input, bins, hann, &out),
        Command::Snr {
            alpha,
            sigma2,
            bins,
            amplitude,
            out,
        } => commands::snr(alpha, &sigma2, bins, amplitude, &out),
        Command::Pipeline { action } => match action {
            PipelineAction::Run(a) => commands::pipeline_run(&a),
            PipelineAction::Verify { manifest, workers } => {
                commands::pipeline_verify(&manifest, workers)
            }
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Partial(msg)) | Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
