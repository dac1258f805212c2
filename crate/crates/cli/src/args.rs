use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distlrp::dataset::Target;
use distlrp::Method;

#[derive(Parser, Debug)]
#[command(name = "distlrp", version, about = "Explain kernel SVM and KNN classifiers with neuralized LRP")]
pub struct Cli {
    /// Worker threads for per-sample parallelism; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Preprocess a CSV, pick hyperparameters by cross-validation and fit a model.
    Train(TrainArgs),
    /// Write the network form of a model as JSON.
    Neuralize(NeuralizeArgs),
    /// Explain individual predictions.
    Explain(ExplainArgs),
    /// Score explanation methods by feature flipping.
    Evaluate(EvaluateArgs),
    /// Compare gradient on the model, gradient on the network, and LRP.
    Ablate(AblateArgs),
    /// Render the model and network outputs over a 2-D grid.
    Surface(SurfaceArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Svm,
    Knn,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Raw CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the target column.
    #[arg(long, default_value = "label")]
    pub label: String,
    /// How the target becomes a ±1 label: `labels`, `median` or `quantile:P`.
    #[arg(long, default_value = "labels", value_parser = parse_target)]
    pub binarize: Target,
    #[arg(long, value_enum, default_value_t = Kind::Svm)]
    pub kind: Kind,
    /// Kernel widths to search (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub gamma: Vec<f64>,
    /// Box constraints to search (comma separated).
    #[arg(long = "c", value_delimiter = ',', default_value = "1")]
    pub c: Vec<f64>,
    /// Neighbour counts to search (comma separated, odd).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct NeuralizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// LRP and baseline hyperparameters shared by the explaining subcommands.
#[derive(Args, Debug, Clone)]
pub struct MethodArgs {
    /// Start from the default LRP hyperparameters for the model.
    #[arg(long)]
    pub heuristic: bool,
    /// Reference-point position in [0, 1]; repeat to explain with several values.
    #[arg(long)]
    pub eta: Vec<f64>,
    /// Smooth-pool stiffness (kernel models).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Rank band half-width (KNN).
    #[arg(long)]
    pub kappa: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub ig_steps: usize,
    #[arg(long, default_value_t = 10)]
    pub shap_permutations: usize,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Normalized split written by `train`.
    #[arg(long)]
    pub data: PathBuf,
    /// Training split, for the occlusion fill values.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value = "lrp")]
    pub method: Method,
    /// Explain only the first N rows.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub params: MethodArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Normalized split to explain.
    #[arg(long)]
    pub data: PathBuf,
    /// Training split: KDE reference data and occlusion fill values.
    #[arg(long)]
    pub train: PathBuf,
    /// Methods to compare (repeat or comma separate).
    #[arg(long = "method", value_delimiter = ',', required = true)]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Inpainting draws averaged per sample.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[command(flatten)]
    pub params: MethodArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[command(flatten)]
    pub params: MethodArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Plot window `xmin,xmax,ymin,ymax`; defaults to the model's points plus a margin.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_target(s: &str) -> Result<Target, String> {
    match s {
        "labels" => Ok(Target::Labels),
        "median" => Ok(Target::Median),
        _ => match s.strip_prefix("quantile:") {
            Some(p) => p
                .parse()
                .map(|p| Target::Quantile { p })
                .map_err(|_| format!("bad quantile `{p}`")),
            None => Err(format!("unknown rule `{s}` (labels, median, quantile:P)")),
        },
    }
}
