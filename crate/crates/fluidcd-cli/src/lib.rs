//! Command-line experiment runner for fluid-diffusion community detection.
//!
//! Subcommands map onto the library pipeline: `detect` runs it end to end,
//! `eigengap` compares the fluid spectrum against heat-diffusion baselines,
//! `experiment` drives the perturbation protocols, and `oracle` spot-checks
//! the transition kernel against its first-passage oracles.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use fluidcd::error::Error as CoreError;

pub mod runner;

/// Exit code for assertion or acceptance failures.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for I/O and usage errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fluidcd", version, about = "Fluid-diffusion community detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full detection pipeline and write partition, spectra, and a
    /// JSON report.
    Detect(DetectArgs),
    /// Compare fluid eigengaps against the heat-diffusion baselines.
    Eigengap(EigengapArgs),
    /// Run a perturbation experiment protocol.
    Experiment(ExperimentArgs),
    /// Cross-check the transition kernel against the splitting-probability
    /// oracles.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Euclidean,
    Linear,
    Poly,
}

#[derive(Debug, Args, Clone)]
pub struct InputArgs {
    /// CSV input path (mutually exclusive with --gen).
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Generator spec: `toy` or `blocks:k=3,sizes=20/20/20,n=30,noise=0.05`.
    #[arg(long, value_name = "SPEC")]
    pub gen: Option<String>,
    /// First CSV row is a header.
    #[arg(long)]
    pub header: bool,
    /// Final CSV column holds integer class labels.
    #[arg(long)]
    pub labels: bool,
}

#[derive(Debug, Args, Clone)]
pub struct PipelineArgs {
    /// Config file of `key=value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram bins for the mutual-information estimator.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Diagonal ridge on the per-sample normalized Laplacians.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Uniform diffusivity level of the transport field.
    #[arg(long)]
    pub diffusivity: Option<f64>,
    /// Knee-detector sensitivity.
    #[arg(long)]
    pub sensitivity: Option<f64>,
    /// k-means restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Feature-affinity kernel.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Linear/polynomial kernel offset l.
    #[arg(long)]
    pub kernel_l: Option<f64>,
    /// Polynomial kernel scale a.
    #[arg(long)]
    pub kernel_a: Option<f64>,
    /// Polynomial kernel exponent b.
    #[arg(long)]
    pub kernel_b: Option<f64>,
    /// Exclude missing-sentinel (0.0) features from each sample's graph.
    #[arg(long)]
    pub masked: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Also write the per-sample relevant-feature sets (relevance.tsv).
    #[arg(long)]
    pub export_relevance: bool,
    /// Also write Q and F as dense CSV.
    #[arg(long)]
    pub export_matrices: bool,
}

#[derive(Debug, Args)]
pub struct EigengapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Missing,
    Imbalance,
    Corrupt,
    KernelAblation,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Protocol to run.
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Repetition count.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Missing fractions for the missing protocol (comma separated).
    #[arg(long, value_name = "LIST")]
    pub mp: Option<String>,
    /// Target class for the imbalance protocol.
    #[arg(long = "class")]
    pub class: Option<usize>,
    /// Target fraction (imbalance) or injected-noise fraction (corrupt).
    #[arg(long)]
    pub frac: Option<f64>,
    /// Injected-noise SNR in dB.
    #[arg(long)]
    pub snr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub v_plus: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub v_minus: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b_plus: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b_minus: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// `key=value` lines; `#` starts a comment.
pub fn load_config(path: &Path) -> Result<HashMap<String, String>, CoreError> {
    let text = fs::read_to_string(path).map_err(|source| CoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                return Err(CoreError::Parse {
                    row: idx + 1,
                    col: 1,
                    reason: format!("expected key=value, found {line:?}"),
                });
            }
        }
    }
    Ok(map)
}

/// Runs a parsed command, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Detect(args) => runner::cmd_detect(&args),
        Command::Eigengap(args) => runner::cmd_eigengap(&args),
        Command::Experiment(args) => runner::cmd_experiment(&args),
        Command::Oracle(args) => runner::cmd_oracle(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CoreError::Io { .. } | CoreError::Parse { .. } | CoreError::Param { .. } => {
                    EXIT_USAGE
                }
                _ => EXIT_FAILURE,
            }
        }
    }
}
