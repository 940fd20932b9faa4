use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Spike-count, noise-variance and smallest-root inference for sample
/// covariance spectra.
///
/// Exit status: 0 on success, 1 on runtime failure, 2 on invalid input or
/// a request outside the model's domain. Set SPIKED_THREADS to bound the
/// worker pool (default: all cores) and SOURCE_DATE_EPOCH to pin the
/// manifest timestamp.
#[derive(Debug, Parser)]
#[command(name = "spiked", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test the hypothesis that the spectrum has exactly M0 spikes.
    TestSpikes(TestSpikesArgs),
    /// Scan M0 = 1..m-max and pick the first local maximum of the p-values.
    EstimateM(EstimateMArgs),
    /// Bias-corrected estimate of the bulk noise variance.
    EstimateNoise(EstimateNoiseArgs),
    /// Test that the smallest p - M population roots are equal.
    TestSmallest(TestSmallestArgs),
    /// Monte Carlo experiments on the four benchmark models.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderArg {
    Auto,
    Yes,
    No,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV, one observation per row.
    pub csv: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub header: HeaderArg,
    /// Scale every column to mean 0 and variance 1 first.
    #[arg(long)]
    pub standardize: bool,
    /// Treat the data as mean zero: no centering, divisor n.
    #[arg(long)]
    pub no_center: bool,
    /// Directory for report files (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Bulk law as r1:w1,r2:w2,... in units of the noise level.
    #[arg(long, default_value = "1")]
    pub bulk: String,
    /// Fourth-moment coefficient; 0 for Gaussian-like or rotated data.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    /// 1 for real data, 0 for complex data.
    #[arg(long, default_value_t = 1)]
    pub q: u8,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FArg {
    X,
    Log,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    /// Use bottom ranks only when the bottom eigenvalue leaves the bulk.
    Edge,
    Large,
}

#[derive(Debug, Args, Serialize)]
pub struct TestSpikesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub m0: usize,
    /// Ranks excluded from the top and bottom as L:S (default: chosen from
    /// the bulk edges).
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long, value_enum, default_value = "x")]
    pub f: FArg,
    /// Noise level multiplying the bulk law.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateMArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub m_max: usize,
    #[arg(long, value_enum, default_value = "x")]
    pub f: FArg,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, value_enum, default_value = "edge")]
    pub policy: PolicyArg,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateNoiseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Number of spikes.
    #[arg(long)]
    pub m: usize,
    /// Ranks excluded as L:S (default M:0).
    #[arg(long)]
    pub split: Option<String>,
    /// Plug-in passes; more than one is experimental.
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum StatArg {
    #[value(name = "TL", alias = "tl")]
    TL,
    #[value(name = "Tx", alias = "tx")]
    Tx,
    #[value(name = "TPLR", alias = "tplr")]
    Tplr,
}

#[derive(Debug, Args, Serialize)]
pub struct TestSmallestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 1)]
    pub q: u8,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub m: usize,
    /// Ranks excluded as L:S (default M:0).
    #[arg(long)]
    pub split: Option<String>,
    /// Noise level, or `auto` for the bias-corrected estimate.
    #[arg(long, default_value = "auto")]
    pub sigma2: String,
    #[arg(long, value_enum, default_value = "TL")]
    pub stat: StatArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Size,
    Noise,
    Roots,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[arg(long, default_value = "model2")]
    pub model: String,
    #[arg(long, default_value = "gaussian")]
    pub sampler: String,
    /// Cells as p:n,p:n,...
    #[arg(long, default_value = "50:100,100:200,200:400")]
    pub grid: String,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Hypothesized counts for size/power runs.
    #[arg(long, default_value = "1,2,3,4,5,6,7")]
    pub m0: String,
    #[arg(long, value_enum, default_value = "TL")]
    pub stat: StatArg,
    /// Fourth-moment coefficient, or `auto` to take it from the sampler.
    #[arg(long, default_value = "auto")]
    pub beta: String,
    #[arg(long)]
    pub out: PathBuf,
}
