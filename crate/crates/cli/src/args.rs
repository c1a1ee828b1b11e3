use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug, Serialize)]
#[command(name = "poclab", version, about = "Simulate and analyse partially ordered Markov models")]
pub struct Cli {
    /// Where to write the run manifest (defaults next to the first output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Sample a time box and write a texture and per-site statistics.
    Simulate(SimulateArgs),
    /// Evaluate the uniqueness criteria of a model.
    Criteria(CriteriaArgs),
    /// Tabulate the criteria over a parameter grid.
    PhaseScan(PhaseScanArgs),
    /// Oriented percolation crossing probabilities and critical estimates.
    Percolate(PercolateArgs),
    /// Run the disagreement coupling between two boundaries.
    Disagree(DisagreeArgs),
    /// Re-run a manifest and compare output hashes.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ising,
    Voter,
    Stavskaya,
    File,
    Pca,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Inverse temperature (ising, voter).
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// External field (ising).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub field: f64,
    /// Flip probability (voter); overrides --beta.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Survival probability (stavskaya).
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Tabulated kernel document (file).
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Cellular automaton document (pca).
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 64)]
    pub width: u32,
    #[arg(long, default_value_t = 64)]
    pub height: u32,
    /// plus, minus, random:P or file:PATH.
    #[arg(long, default_value = "plus")]
    pub boundary: String,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Texture of the first replica (PGM, or PPM for more than two colors).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-site means over the replicas.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct PcArgs {
    /// Critical value to compare against, in addition to 1/2.
    #[arg(long)]
    pub pc: Option<f64>,
    /// Also estimate the critical value by Monte Carlo.
    #[arg(long)]
    pub estimate_pc: bool,
    #[arg(long, default_value = "z2")]
    pub pc_lattice: String,
    #[arg(long, default_value_t = 64)]
    pub pc_depth: u32,
    #[arg(long, default_value_t = 1000)]
    pub pc_replicas: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CriteriaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub pc: PcArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanModel {
    Ising,
    Stavskaya,
}

#[derive(Args, Debug, Serialize)]
pub struct PhaseScanArgs {
    #[arg(long, value_enum, default_value = "ising")]
    pub model: ScanModel,
    /// LO:HI:N
    #[arg(long, default_value = "0.05:3:60")]
    pub beta_range: String,
    /// LO:HI:N
    #[arg(long, default_value = "-1:1:41", allow_hyphen_values = true)]
    pub field_range: String,
    /// LO:HI:N (stavskaya)
    #[arg(long, default_value = "0:1:101")]
    pub p_range: String,
    /// Value used for the dp_ok_mc column; estimated when absent.
    #[arg(long)]
    pub pc: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub pc_depth: u32,
    #[arg(long, default_value_t = 1000)]
    pub pc_replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV region map (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Region map as a grayscale image (ising only).
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct PercolateArgs {
    /// z2, chain or tree.
    #[arg(long, default_value = "z2")]
    pub space: String,
    #[arg(long, default_value_t = 64)]
    pub depth: u32,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    /// Open probability.
    #[arg(long, conflicts_with = "estimate_pc", required_unless_present = "estimate_pc")]
    pub q: Option<f64>,
    /// Bisection for the critical value over a doubling depth schedule.
    #[arg(long)]
    pub estimate_pc: bool,
    /// First depth of the schedule.
    #[arg(long, default_value_t = 8)]
    pub min_depth: u32,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV of the crossing curves.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct DisagreeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Side of the square box (Z² models).
    #[arg(long, default_value_t = 32)]
    pub size: u32,
    /// Two boundaries separated by a comma.
    #[arg(long, default_value = "minus,plus")]
    pub boundaries: String,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-site disagreement frequencies.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
