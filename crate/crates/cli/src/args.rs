use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Ellipse detection tooling: scan alignment, dataset preparation, ellipse
/// IoU and Gaussian-metric fitting.
#[derive(Debug, Parser)]
#[command(name = "elgauss", version)]
pub struct Cli {
    /// Seed for every random choice a subcommand makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for per-image work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Undo per-column vertical scan distortion.
    Align(AlignArgs),
    /// Dataset preparation.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Pixel-sampled IoU of two ellipses.
    Iou(IouArgs),
    /// Match predictions to ground truth and report mean IoU.
    Eval(EvalArgs),
    /// Fit one ellipse to another by gradient descent on a distance.
    Fit(FitArgs),
    /// Draw annotation outlines over an image.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignMethod {
    /// Weighted neighbour-column distance minimisation.
    Eq1,
    /// First-bright-pixel baseline.
    Threshold,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Input PNG, or a directory of PNGs.
    #[arg(long)]
    pub input: PathBuf,
    /// Output PNG, or a directory when --input is one.
    #[arg(long)]
    pub output: PathBuf,
    /// Previous columns compared against.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Distance-weight exponent.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Norm order, 1 or 2.
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    /// Largest shift searched, in pixels.
    #[arg(long, default_value_t = 200)]
    pub max_shift: usize,
    /// Shift estimator.
    #[arg(long, value_enum, default_value_t = AlignMethod::Eq1)]
    pub method: AlignMethod,
    /// Intensity threshold for --method threshold.
    #[arg(long, default_value_t = 40)]
    pub threshold: u8,
    /// Grey level written into vacated rows.
    #[arg(long, default_value_t = 0)]
    pub pad: u8,
    /// Score only the rows a shifted column still covers.
    #[arg(long)]
    pub overlap_only: bool,
    /// Write the shift profile as JSON (a directory in batch mode).
    #[arg(long)]
    pub emit_shifts: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Random square crops around knots, resized, with re-parameterized annotations.
    Crop(CropArgs),
    /// Board-level train/val/test split.
    Split(SplitArgs),
    /// Convert a VGG Image Annotator export into per-image annotation files.
    ImportVia(ImportViaArgs),
}

#[derive(Debug, Args)]
pub struct CropArgs {
    /// Directory of annotation JSON files (images resolved relative to them).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Directory for crop PNGs and their annotation files.
    #[arg(long)]
    pub out: PathBuf,
    /// Crops drawn per source image.
    #[arg(long)]
    pub count_per_image: usize,
    /// Side of the resized square.
    #[arg(long, default_value_t = 512)]
    pub out_size: usize,
    /// Smallest crop side in source pixels.
    #[arg(long)]
    pub min_side: Option<usize>,
    /// Largest crop side in source pixels.
    #[arg(long)]
    pub max_side: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Annotation file or directory to take board ids from; without it,
    /// board ids are read from stdin, one per line.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.1, 0.2])]
    pub ratios: Vec<f64>,
    /// Write the split as JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportViaArgs {
    /// VIA project or annotation export (JSON).
    #[arg(long)]
    pub via: PathBuf,
    /// Directory holding the annotated images.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory for the per-image annotation files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IouArgs {
    /// First ellipse as cx,cy,rx,ry,theta.
    #[arg(long, allow_hyphen_values = true)]
    pub a: String,
    /// Second ellipse as cx,cy,rx,ry,theta.
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
    /// Also report the dense-sampling reference with this many samples per axis.
    #[arg(long)]
    pub oracle: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Annotation file or directory with the detections.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Annotation file or directory with the ground truth.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Pairs at or below this IoU are not matched.
    #[arg(long, default_value_t = 0.0)]
    pub min_iou: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMetricArg {
    /// Squared 2-Wasserstein distance.
    W2,
    /// KL divergence from the fitted ellipse to the target.
    Kl,
    /// Squared parameter distance.
    L2,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Target ellipse as cx,cy,rx,ry,theta.
    #[arg(long, allow_hyphen_values = true)]
    pub target: String,
    /// Starting ellipse as cx,cy,rx,ry,theta.
    #[arg(long, allow_hyphen_values = true)]
    pub init: String,
    /// Loss to minimise.
    #[arg(long, value_enum, default_value_t = FitMetricArg::W2)]
    pub metric: FitMetricArg,
    /// Initial line-search step.
    #[arg(long, default_value_t = 1.0)]
    pub step_size: f64,
    /// Iteration limit.
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Stop once the gradient's largest entry falls below this.
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tolerance: f64,
    /// Write the descent trace as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Base image.
    #[arg(long)]
    pub image: PathBuf,
    /// Output PNG.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth annotations, drawn in green.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Detections, drawn in red.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Baseline detections, drawn in blue.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Outline thickness in pixels.
    #[arg(long, default_value_t = 2)]
    pub stroke_width: u32,
}
