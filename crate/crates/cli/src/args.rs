//! Command-line grammar.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// A number or the literal `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOr<T> {
    Auto,
    Value(T),
}

impl<T: FromStr> FromStr for AutoOr<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(AutoOr::Auto)
        } else {
            s.parse()
                .map(AutoOr::Value)
                .map_err(|e| format!("expected a number or `auto`: {e}"))
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyperseg", version, about = "Unsupervised hyperspectral segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and write labels, a rendering and reports.
    Segment(SegmentArgs),
    /// Build superpixels only, optionally sweeping m and m_clust.
    Superpixels(SuperpixelArgs),
    /// Inject noise into a cube.
    Noise(NoiseArgs),
    /// Score a label map against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "salinas")]
    Salinas,
    #[value(name = "salinasA")]
    SalinasA,
    #[value(name = "paviaC")]
    PaviaC,
    #[value(name = "paviaU")]
    PaviaU,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Salinas => "salinas",
            Preset::SalinasA => "salinasA",
            Preset::PaviaC => "paviaC",
            Preset::PaviaU => "paviaU",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Bandwidth from the flags or estimated from the data.
    Auto,
    /// Bandwidth picked by best NMI against --gt.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Features {
    /// Pixel spectrum plus superpixel center.
    Combined,
    /// Pixel spectrum only.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scaling {
    MaxDimension,
    Pixels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    Gaussian,
    Impulsive,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoissonModeArg {
    Scaled,
    Additive,
}

/// Flags shared by commands that read a cube.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Cube file (.npy, H x W x L).
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the input as already normalized to [0, 1].
    #[arg(long)]
    pub normalized: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print machine-readable JSON only.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub common: InputArgs,
    /// Ground-truth label file (.npy, H x W); enables metrics.json.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Superpixel count, or `auto` for the image-size heuristic.
    #[arg(long)]
    pub k: Option<AutoOr<usize>>,
    /// Divisor of the image-size heuristic for `--k auto`.
    #[arg(long, default_value_t = hyperseg::regionseg::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub mclust: Option<f64>,
    #[arg(long)]
    pub pre_bandwidth: Option<f64>,
    /// Second-stage bandwidth, or `auto` to estimate it.
    #[arg(long)]
    pub bandwidth: Option<AutoOr<f64>>,
    #[arg(long, default_value_t = hyperseg::regionseg::DEFAULT_QUANTILE)]
    pub quantile: f64,
    #[arg(long, default_value_t = hyperseg::regionseg::DEFAULT_BANDWIDTH_SAMPLE)]
    pub bandwidth_sample: usize,
    /// Comma-separated bandwidths searched in oracle mode.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub mode: Mode,
    /// Reduce the spectral and superpixel-center blocks with PCA.
    #[arg(long)]
    pub pca: bool,
    #[arg(long, default_value_t = hyperseg::regionseg::DEFAULT_VARIANCE_THRESHOLD)]
    pub variance: f64,
    /// Minimum region area in pixels (default: a quarter superpixel).
    #[arg(long)]
    pub min_region: Option<usize>,
    #[arg(long, value_enum, default_value_t = Features::Combined)]
    pub features: Features,
    #[arg(long, value_enum, default_value_t = Scaling::MaxDimension)]
    pub spatial_scaling: Scaling,
    /// Overlap fraction for the undersegmentation error in metrics.json.
    #[arg(long, default_value_t = hyperseg::metrics::DEFAULT_B_FRACTION)]
    pub b_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SuperpixelArgs {
    #[command(flatten)]
    pub common: InputArgs,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Superpixel-evaluation preset (salinas: K = 1000, salinasA: K = 500).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub mclust: Option<f64>,
    #[arg(long)]
    pub pre_bandwidth: Option<f64>,
    #[arg(long, default_value_t = hyperseg::metrics::DEFAULT_B_FRACTION)]
    pub b_fraction: f64,
    /// Also write ue_sweep.csv over m in {0.2..1} and m_clust in {0..1}.
    #[arg(long, requires = "gt")]
    pub sweep: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub common: InputArgs,
    /// Output cube path; provenance goes next to it with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub kind: NoiseKind,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Fraction of pixels receiving Gaussian noise.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    #[arg(long, default_value_t = hyperseg::noise::DEFAULT_POISSON_LAMBDA)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = PoissonModeArg::Scaled)]
    pub poisson_mode: PoissonModeArg,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Predicted label file (.npy).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Also report the undersegmentation error, treating --pred as superpixels.
    #[arg(long)]
    pub ue: bool,
    #[arg(long, default_value_t = hyperseg::metrics::DEFAULT_B_FRACTION)]
    pub b_fraction: f64,
    /// Write metrics.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}
