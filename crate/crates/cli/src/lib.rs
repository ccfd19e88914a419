//! The `gael` command-line pipeline: toy data, training, encoding, GMM
//! fitting, generation, clustering, evaluation and plotting.

pub mod commands;
pub mod manifest;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Maps library errors onto the process exit-code contract.
pub fn exit_code(err: &gael::Error) -> u8 {
    use gael::Error::*;
    match err {
        NonFinite { .. } | Domain { .. } => EXIT_NUMERIC,
        Io(_) | Parse { .. } | Json(_) | FormatVersion { .. } => EXIT_IO,
        ShapeMismatch { .. } | InvalidArgument(_) | NonScalarRoot { .. } => EXIT_USAGE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gael", version, about = "Adversarial encoder training with GMM latent modeling on toy data")]
pub struct Cli {
    /// Record outputs and resolved flags in this manifest (created or updated).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the grid mixture and write it as CSV plus the true GMM as JSON.
    MakeData(MakeDataArgs),
    /// Train generator and critic/encoder; writes checkpoints, metric log and manifest.
    Train(TrainArgs),
    /// Encode data rows to latent means.
    Encode(EncodeArgs),
    /// Fit a Gaussian mixture to latent codes.
    FitGmm(FitGmmArgs),
    /// Generate samples from the prior or from a fitted GMM.
    Generate(GenerateArgs),
    /// Assign latents to GMM components and score against true labels.
    Cluster(ClusterArgs),
    /// Mode coverage of samples against the true mixture.
    Eval(EvalArgs),
    /// Scatter plot of 2D points as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct MakeDataArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub grid_side: u64,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 0.05)]
    pub std: f64,
    #[arg(long, default_value_t = 50_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth GMM path (default: the dataset path with extension `gmm.json`).
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GanArg {
    Vanilla,
    WganGp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = GanArg::WganGp)]
    pub gan: GanArg,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub latent_dim: u64,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    /// Critic updates per generator update (default: 5 for wgan-gp, 1 for vanilla).
    #[arg(long)]
    pub n_critic: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta2: f64,
    #[arg(long, default_value_t = 10.0)]
    pub gp_coefficient: f64,
    /// Hidden widths of generator and critic trunk, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [128usize, 128, 128])]
    pub hidden: Vec<usize>,
    #[arg(long)]
    pub learn_sigma: bool,
    /// Add the encoder term to the generator objective as well.
    #[arg(long)]
    pub couple: bool,
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: u64,
    /// True mixture for periodic mode-coverage snapshots in the metric log.
    #[arg(long)]
    pub truth_gmm: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceArg {
    Full,
    Diagonal,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct FitGmmArgs {
    #[arg(long)]
    pub latents: PathBuf,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = CovarianceArg::Full)]
    pub covariance: CovarianceArg,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Sample latents from this GMM instead of the prior.
    #[arg(long, conflicts_with = "prior")]
    pub gmm: Option<PathBuf>,
    /// Sample latents from the standard normal prior (the default).
    #[arg(long)]
    pub prior: bool,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub gmm: PathBuf,
    #[arg(long)]
    pub latents: PathBuf,
    /// CSV whose last column holds the true labels (e.g. the dataset).
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub truth_gmm: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = gael::metrics::DEFAULT_MIN_FRAC)]
    pub min_frac: f64,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub centers: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("gael: {e}");
            exit_code(&e)
        }
    }
}
