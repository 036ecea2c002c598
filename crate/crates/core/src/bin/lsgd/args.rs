use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use lsgd::kmeans::KMeansMode;
use lsgd::Schedule;

#[derive(Debug, Parser)]
#[command(name = "lsgd", version, about = "Incremental local SGD: out-of-core multiclass linear classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an ensemble of local SGD models block by block
    Train(TrainArgs),
    /// Predict labels for every point of a dataset
    Predict(PredictArgs),
    /// Score a model on a labeled dataset
    Evaluate(EvaluateArgs),
    /// Train and score several configurations on one train/test split
    Bench(BenchArgs),
    /// Cut a dataset into contiguous block files
    Split(SplitArgs),
    /// Random train/test split of a dataset
    Holdout(HoldoutArgs),
    /// Generate a synthetic Gaussian-blob dataset
    GenBlobs(GenBlobsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    /// Detect from the file's leading bytes
    Auto,
    Sparse,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansArg {
    Lloyd,
    Minibatch,
}

impl From<KMeansArg> for KMeansMode {
    fn from(k: KMeansArg) -> Self {
        match k {
            KMeansArg::Lloyd => KMeansMode::Lloyd,
            KMeansArg::Minibatch => KMeansMode::MiniBatch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleArg {
    Constant,
    Inverse,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Constant => Schedule::Constant,
            ScheduleArg::Inverse => Schedule::InverseScaling,
        }
    }
}

/// Hyperparameters shared by `train` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct SgdArgs {
    /// SGD epochs per binary problem
    #[arg(long, default_value_t = 50)]
    pub epochs: u32,
    /// Base learning rate
    #[arg(long, default_value_t = 0.001)]
    pub eta: f64,
    /// Regularization strength
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Constant)]
    pub schedule: ScheduleArg,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = KMeansArg::Lloyd)]
    pub kmeans: KMeansArg,
    /// Mini-batch size for --kmeans minibatch
    #[arg(long, default_value_t = 1024)]
    pub batch_size: usize,
    /// k-means iteration cap
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, required_unless_present = "replay")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
    /// Dimensionality of sparse input (default: largest index in the file)
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long, required_unless_present = "replay")]
    pub model_out: Option<PathBuf>,
    /// Metrics JSON (default: <model-out>.metrics.json)
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Clusters per block
    #[arg(long, conflicts_with = "cluster_size")]
    pub k: Option<usize>,
    /// Derive k per block as ceil(block points / cluster size)
    #[arg(long, default_value_t = 500)]
    pub cluster_size: usize,
    /// Number of blocks
    #[arg(long, conflicts_with_all = ["block_size", "memory_budget"])]
    pub blocks: Option<usize>,
    /// Points per block
    #[arg(long, conflicts_with = "memory_budget")]
    pub block_size: Option<usize>,
    /// Bytes of training data per block
    #[arg(long, default_value_t = 2 << 30)]
    pub memory_budget: u64,
    #[command(flatten)]
    pub sgd: SgdArgs,
    /// Re-run exactly from the reproducibility stanza of a metrics JSON
    #[arg(long, conflicts_with_all = ["input", "k", "blocks", "block_size", "dims"])]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
    /// One predicted label per line
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
    /// Also write the metrics JSON here
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Omit the confusion matrix above this many classes
    #[arg(long, default_value_t = 100)]
    pub confusion_max_classes: usize,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
    /// Separate test set; otherwise a seeded holdout of --input is used
    #[arg(long)]
    pub test_input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// `label:k=50,blocks=1[,threads=4]` or `label:cluster-size=500,blocks=8`; repeatable
    #[arg(long = "config", required = true)]
    pub configs: Vec<String>,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, conflicts_with = "blocks", required_unless_present = "blocks")]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct HoldoutArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GenBlobsArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub points_per_class: usize,
    #[arg(long)]
    pub dims: usize,
    #[arg(long, default_value_t = 20.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Dense)]
    pub format: Format,
}
