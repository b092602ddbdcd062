use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cvm", version, about = "Contrast-based variational segmentation from point annotations")]
pub struct Cli {
    /// Worker threads for per-point solves and batch evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correlation, contrast and contrast-mean maps for every annotated point.
    Contrast(ContrastArgs),
    /// Variational segmentation of a feature map (or a scalar image).
    Segment(SegmentArgs),
    /// Distance-constrained selective segmentation of a scalar image.
    Baseline(BaselineArgs),
    /// Partial cross-entropy and weighted KL of a prediction.
    Losses(LossesArgs),
    /// Dice, accuracy, kappa and AUC of a mask, or of every mask in a directory.
    Eval(EvalArgs),
    /// Generate a synthetic instance from a spec file.
    Synth(SynthArgs),
    /// Render a scalar field as a heatmap PNG.
    Render(RenderArgs),
}

/// Values that may also come from the config file. Flags override the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat JSON config; keys match the long flag names with underscores.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub iota: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub grad_reg: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ContrastArgs {
    #[arg(long, value_name = "PATH")]
    pub features: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub points: PathBuf,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// C×H×W feature map (NPY).
    #[arg(long, value_name = "PATH", conflicts_with = "image", required_unless_present = "image")]
    pub features: Option<PathBuf>,
    /// H×W scalar image segmented directly, without contrast maps.
    #[arg(long, value_name = "PATH")]
    pub image: Option<PathBuf>,
    #[arg(long, value_name = "PATH", required_unless_present = "image")]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Euclidean,
    Geodesic,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    /// In-target points are the markers.
    #[arg(long, value_name = "PATH")]
    pub points: PathBuf,
    #[arg(long, value_enum)]
    pub distance: DistanceArg,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub speed_eps: Option<f64>,
    #[arg(long)]
    pub speed_beta: Option<f64>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    /// Predicted foreground probabilities (NPY).
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,
    /// Soft segmentation used as the KL target (NPY).
    #[arg(long, value_name = "PATH")]
    pub supervision: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub points: PathBuf,
    /// Grow every annotated point into its 3×3 neighbourhood.
    #[arg(long)]
    pub expand: bool,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted mask PNG, or a directory of them.
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,
    /// Ground-truth mask PNG, or a directory with the same file names.
    #[arg(long, value_name = "PATH")]
    pub gt: PathBuf,
    /// Scores for AUC (NPY), or a directory of `<name>.npy`; defaults to the prediction.
    #[arg(long, value_name = "PATH")]
    pub scores: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "PATH")]
    pub spec: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, value_name = "PATH")]
    pub field: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Min-max normalize before applying the colormap.
    #[arg(long)]
    pub normalize: bool,
}
