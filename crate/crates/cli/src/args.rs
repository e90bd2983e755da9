//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gnodeformer::graph::SbmSpec;
use gnodeformer::model::{Activation, RkOrder};

#[derive(Debug, Parser)]
#[command(
    name = "gnodeformer",
    version,
    about = "Spectral graph transformer training and federated simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a stochastic block model graph and write it as a dataset directory.
    GenData(GenDataArgs),
    /// Train one model on the whole graph.
    TrainCentralized(TrainArgs),
    /// Simulate federated training over Dirichlet-partitioned clients.
    TrainFederated(TrainArgs),
    /// Per-client label histograms and skew statistics over many partition seeds.
    PartitionReport(PartitionArgs),
    /// Parameter counts and wire bytes for named dataset configurations.
    CommReport(CommArgs),
    /// Repeat a training run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Block model, e.g. `blocks=100,100,100;p_in=0.1;p_out=0.01;features=16;signal=1;seed=0`.
    #[arg(long)]
    pub sbm: SbmSpec,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Dataset directory (meta, edges, features, labels).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Generate a block model instead of loading a dataset.
    #[arg(long)]
    pub sbm: Option<SbmSpec>,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Runge-Kutta stages: 1, 2 or 4.
    #[arg(long, default_value_t = RkOrder::Rk2)]
    pub rk: RkOrder,
    /// Eigenvalue encoding scale.
    #[arg(long, default_value_t = 100.0)]
    pub epsilon: f64,
    /// Hidden width of the convolution head.
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Filter channels including the identity channel [default: heads + 1].
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = Activation::Gelu)]
    pub activation: Activation,
    /// Keep the Runge-Kutta combination weights at their classical values.
    #[arg(long)]
    pub freeze_rk_weights: bool,
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Add missing reverse arcs to a directed edge list.
    #[arg(long)]
    pub symmetrize: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Early-stopping patience in epochs; 0 disables (centralized only).
    #[arg(long, default_value_t = 50)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train/validation/test fractions.
    #[arg(long, default_value = "0.6,0.2,0.2")]
    pub split: String,
    /// Centralized mode: train on the union of the federated client masks.
    #[arg(long)]
    pub federated_split: bool,
    #[arg(long, default_value_t = 5)]
    pub clients: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 40)]
    pub rounds: usize,
    #[arg(long, default_value_t = 5)]
    pub local_epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub fraction_fit: f64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Save the global parameters every k rounds; 0 keeps only the final checkpoint.
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Directory for cached eigendecompositions.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub symmetrize: bool,
    #[arg(long, default_value_t = 5)]
    pub clients: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Number of partition seeds, starting at `--seed`.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extra or replacement entry `name:features:classes`; repeatable.
    #[arg(long = "config", value_name = "NAME:F:C")]
    pub configs: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
