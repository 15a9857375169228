use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "tvflow", version, about = "Exact total-variation flow, spectral TV and mode decompositions")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "TVFLOW_THREADS", default_value_t = 1, value_parser = positive_usize)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a 1D signal with the exact TV flow and write the event list as JSON.
    Flow(FlowArgs),
    /// Write the spectrum (t, mass) of a signal or flow as CSV, or its components as JSON.
    Spectrum(SpectrumArgs),
    /// Keep the spectral components whose transition time lies in a band.
    Filter(FilterArgs),
    /// Time-rescaled DMD of the flow, segment by segment.
    Rdmd(RdmdArgs),
    /// Sparse decay-profile fit of the flow's snapshots.
    Kmd(KmdArgs),
    /// Adaptive explicit anisotropic TV flow of an image.
    Flow2d(Flow2dArgs),
    /// Numerical spectral bands of the anisotropic flow of an image.
    Bands2d(Bands2dArgs),
    /// Time the reference solver against the exact solver.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct Input1d {
    /// Signal CSV, or a flow JSON written by `tvflow flow`.
    pub input: PathBuf,

    /// Samples closer than this are merged into one plateau.
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub input: Input1d,

    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Cross-check the flow against the implicit reference solver.
    #[arg(long)]
    pub verify: bool,

    /// Time step of the reference solver used by --verify.
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: Input1d,

    /// Output file: `.json` for the components, anything else for the (t, mass) CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: Input1d,

    /// Transition-time band `LO:HI`; a `%` suffix means percent of the extinction time.
    #[arg(long)]
    pub band: Band,

    /// Add the mean of the signal to the filtered output.
    #[arg(long)]
    pub include_mean: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Cross-check the flow against the implicit reference solver.
    #[arg(long)]
    pub verify: bool,

    /// Time step of the reference solver used by --verify.
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub verify_dt: f64,
}

#[derive(Debug, Args)]
pub struct RdmdArgs {
    #[command(flatten)]
    pub input: Input1d,

    /// Sampling step in rescaled time; defaults to 1/64 of the shortest segment.
    #[arg(long, value_parser = positive)]
    pub dt: Option<f64>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KmdArgs {
    #[command(flatten)]
    pub input: Input1d,

    /// Snapshot spacing; defaults to 1/256 of the horizon.
    #[arg(long, value_parser = positive)]
    pub dt: Option<f64>,

    /// Snapshot horizon in multiples of the extinction time. Sampling past
    /// extinction exposes every profile's kink, which keeps the rates
    /// identifiable.
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    pub horizon: f64,

    /// Maximal number of active profiles.
    #[arg(long, default_value_t = 8)]
    pub sparsity: usize,

    /// Relative residual at which the fit stops; also the pruning level.
    #[arg(long, default_value_t = 1e-6, value_parser = nonnegative)]
    pub threshold: f64,

    /// Number of candidate rates, spread uniformly in [-rate-max, 0).
    #[arg(long, default_value_t = 200, value_parser = positive_usize)]
    pub atoms: usize,

    /// Fastest candidate decay rate; defaults to 1.25 / (first transition time).
    #[arg(long, value_parser = positive)]
    pub rate_max: Option<f64>,

    /// Standard deviation of Gaussian noise added to the snapshots.
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    pub noise: f64,

    /// Seed of the snapshot noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Input2d {
    /// Image as PGM (P2/P5) or CSV matrix.
    pub input: PathBuf,

    /// Step factor of the adaptive scheme, in (0, 2).
    #[arg(long, default_value_t = 1.0, value_parser = step_factor)]
    pub delta: f64,

    /// Stop when J_ani falls below this fraction of its initial value.
    #[arg(long, default_value_t = 1e-6, value_parser = nonnegative)]
    pub stop_ratio: f64,

    #[arg(long, default_value_t = 1_000_000, value_parser = positive_usize)]
    pub max_steps: usize,
}

#[derive(Debug, Args)]
pub struct Flow2dArgs {
    #[command(flatten)]
    pub input: Input2d,

    /// Output directory for the frames and `index.json`.
    #[arg(long)]
    pub out: PathBuf,

    /// Compare the frames with the implicit anisotropic reference solver.
    #[arg(long)]
    pub verify: bool,

    /// Time step of the reference solver used by --verify.
    #[arg(long, default_value_t = 1e-2, value_parser = positive)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct Bands2dArgs {
    #[command(flatten)]
    pub input: Input2d,

    /// Band `LO:HI` in time; `%` means percent of the evolved time. Repeatable.
    #[arg(long = "band", required = true)]
    pub bands: Vec<Band>,

    /// Points of the uniform time grid.
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,

    /// Output directory for `band_NN.csv`, `residual.csv` and `index.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Signal CSV; a synthetic natural-image row when omitted.
    pub input: Option<PathBuf>,

    /// Length of the synthetic row.
    #[arg(long, default_value_t = 700)]
    pub length: usize,

    /// Seed of the synthetic row.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 5, value_parser = positive_usize)]
    pub repeats: usize,

    /// Time step of the reference solver.
    #[arg(long, default_value_t = 1e-2, value_parser = positive)]
    pub dt: f64,

    /// JSON report; the table always goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One end of a band: an absolute time or a percentage of a reference time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Edge {
    Time(f64),
    Percent(f64),
}

impl Edge {
    pub fn resolve(self, total: f64) -> f64 {
        match self {
            Edge::Time(t) => t,
            Edge::Percent(p) => p / 100.0 * total,
        }
    }
}

impl FromStr for Edge {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (number, percent) = match s.strip_suffix('%') {
            Some(n) => (n, true),
            None => (s, false),
        };
        let v: f64 = number.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
        if v.is_nan() || v < 0.0 {
            return Err(format!("band edge {s:?} must be >= 0"));
        }
        Ok(if percent { Edge::Percent(v) } else { Edge::Time(v) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub lo: Edge,
    pub hi: Edge,
}

impl Band {
    pub fn resolve(self, total: f64) -> (f64, f64) {
        (self.lo.resolve(total), self.hi.resolve(total))
    }
}

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("band {s:?} must look like LO:HI"))?;
        let band = Band {
            lo: lo.parse()?,
            hi: hi.parse()?,
        };
        let ordered = match (band.lo, band.hi) {
            (Edge::Time(a), Edge::Time(b)) | (Edge::Percent(a), Edge::Percent(b)) => a < b,
            _ => true,
        };
        if !ordered {
            return Err(format!("band {s:?} needs LO < HI"));
        }
        Ok(band)
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} must be positive"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} must be >= 0"))
    }
}

fn step_factor(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v < 2.0 {
        Ok(v)
    } else {
        Err(format!("delta {s} must lie in (0, 2)"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{s:?} must be a positive integer")),
    }
}
