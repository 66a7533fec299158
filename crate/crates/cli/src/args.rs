use std::path::PathBuf;

use balflow_core::dynamics::IntegratorOptions;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "balflow",
    version,
    about = "Gradient flows of structural balance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write samples plus events.
    Simulate(SimulateArgs),
    /// Balance verdict, factions and eigenvalue signs of a matrix.
    Classify(ClassifyArgs),
    /// Build and certify symmetric equilibria.
    Equilibria(EquilibriaArgs),
    /// Seeded Monte Carlo sweep over random initial conditions.
    Montecarlo(MonteCarloArgs),
    /// Dissonance over the n = 3 sphere.
    Landscape(LandscapeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Pure,
    Kulakowski,
    ProjectedPure,
    ProjectedKulakowski,
    EtaZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    #[value(alias = "generic-asymmetric")]
    Asymmetric,
    #[value(alias = "generic-symmetric")]
    Symmetric,
    #[value(alias = "kulakowski-generic")]
    Kulakowski,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory
    #[arg(long, env = "BALFLOW_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TolArgs {
    #[arg(long, default_value_t = IntegratorOptions::default().rel_tol)]
    pub rtol: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().abs_tol)]
    pub atol: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().max_time)]
    pub max_time: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().blowup_norm)]
    pub blowup_norm: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().grad_tol)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().sign_window)]
    pub sign_window: f64,
    /// Sampling interval; 0 records every accepted step
    #[arg(long, default_value_t = IntegratorOptions::default().sample_stride)]
    pub sample_stride: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().zero_tol)]
    pub zero_tol: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().eigen_band)]
    pub eigen_band: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().max_step)]
    pub max_step: f64,
}

impl TolArgs {
    pub fn options(&self) -> IntegratorOptions {
        IntegratorOptions {
            rel_tol: self.rtol,
            abs_tol: self.atol,
            max_time: self.max_time,
            blowup_norm: self.blowup_norm,
            grad_tol: self.grad_tol,
            sign_window: self.sign_window,
            sample_stride: self.sample_stride,
            zero_tol: self.zero_tol,
            eigen_band: self.eigen_band,
            max_step: self.max_step,
            ..IntegratorOptions::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Initial matrix (CSV or .json)
    #[arg(long, conflicts_with = "family")]
    pub input: Option<PathBuf>,
    /// Draw the initial matrix from a random family instead of --input
    #[arg(long, value_enum, requires = "n")]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// File name stem for the written files
    #[arg(long, default_value = "trajectory")]
    pub name: String,
    #[command(flatten)]
    pub tol: TolArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = balflow_core::matrix::DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub eigen_band: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EquilibriaArgs {
    #[arg(long)]
    pub n: usize,
    /// Rank of the frame; omit with --balanced
    #[arg(long, required_unless_present = "balanced")]
    pub k: Option<usize>,
    /// Sign vector for k = 1, e.g. "1,-1,1"
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub signs: Option<Vec<i8>>,
    /// Angles for k = 2 (radians); default is the regular n-gon
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Option<Vec<f64>>,
    /// Enumerate the balanced equilibria on the first n1 nodes
    #[arg(long, conflicts_with_all = ["k", "signs", "angles"])]
    pub balanced: bool,
    #[arg(long)]
    pub n1: Option<usize>,
    /// Add residual, dissonance and instability certificate
    #[arg(long)]
    pub check: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MonteCarloArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Run the full N = 27000 sample (long)
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long, default_value = "montecarlo")]
    pub name: String,
    #[command(flatten)]
    pub tol: TolArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LandscapeArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 400)]
    pub lon: usize,
    #[arg(long, default_value_t = 200)]
    pub lat: usize,
    /// Add stereographic coordinates (u, v) from the pole (0, 0, 1)
    #[arg(long)]
    pub stereographic: bool,
    /// Scale to unit matrix norm instead of the coordinate sphere
    #[arg(long)]
    pub matrix_norm: bool,
    #[arg(long, default_value = "landscape")]
    pub name: String,
    #[command(flatten)]
    pub output: OutputArgs,
}
