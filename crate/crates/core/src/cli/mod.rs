//! The `suvclip` command-line interface.
//!
//! Exit codes: 0 on success, 1 for domain and validation errors (including
//! bad usage), 2 for I/O errors.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;
use crate::normalize::{MaskScope, Scheme};

pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "suvclip", version, about = "PET SUV normalization, threshold contouring and segmentation metrics")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Print a machine-readable run summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// JSON file of default flag values; command-line flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic phantom dataset.
    Phantom(PhantomArgs),
    /// Compute dataset intensity statistics.
    Fingerprint(FingerprintArgs),
    /// Run the threshold sweep and derive the FCN upper clip bound.
    FcnFit(FcnFitArgs),
    /// Write a normalized copy of a dataset.
    Normalize(NormalizeArgs),
    /// Threshold every case at a percentage of SUVmax or an absolute SUV.
    Segment(SegmentArgs),
    /// Score predicted masks against ground truth.
    Evaluate(EvaluateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Phantom(_) => "phantom",
            Command::Fingerprint(_) => "fingerprint",
            Command::FcnFit(_) => "fcn-fit",
            Command::Normalize(_) => "normalize",
            Command::Segment(_) => "segment",
            Command::Evaluate(_) => "evaluate",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PhantomArgs {
    #[arg(long, value_name = "PATH")]
    pub spec: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Family seed (default: the spec's rng_seed).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FingerprintArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
    #[arg(long, default_value = "prostate")]
    pub scope: MaskScope,
    /// Use every n-th in-scope voxel for the moment statistics.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FcnFitArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub p_start: f64,
    #[arg(long, default_value_t = 70.0)]
    pub p_end: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p_step: f64,
    /// NSD tolerance in mm.
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value = "prostate")]
    pub scope: MaskScope,
    /// Sweep result JSON.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Curve CSV (p_percent, avg_dsc, avg_nsd, avg_hd95).
    #[arg(long, value_name = "PATH")]
    pub curves: PathBuf,
    /// Per-case threshold CSV.
    #[arg(long, value_name = "PATH")]
    pub thresholds: Option<PathBuf>,
    /// Fingerprint JSON to record maxT in; computed first if absent.
    #[arg(long, value_name = "PATH")]
    pub fingerprint: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct NormalizeArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
    /// zscore | ct | fixedclip:MIN:MAX | fcn | none
    #[arg(long)]
    pub scheme: Scheme,
    #[arg(long, value_name = "PATH")]
    pub fingerprint: Option<PathBuf>,
    /// Divide FCN output by maxT.
    #[arg(long)]
    pub rescale: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("level").required(true).args(["percent", "threshold"])))]
pub struct SegmentArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
    /// Percentage of each case's SUVmax.
    #[arg(long)]
    pub percent: Option<f64>,
    /// Absolute SUV threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "prostate")]
    pub scope: MaskScope,
    /// Keep only the largest connected component (6 or 26 connectivity).
    #[arg(long, value_name = "CONNECTIVITY")]
    pub largest_component: Option<u32>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// NSD tolerance in mm.
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Metrics CSV of another run to compare against.
    #[arg(long, value_name = "PATH")]
    pub wilcoxon: Option<PathBuf>,
    #[arg(long, default_value = crate::dataset::DEFAULT_FILE_ENDING)]
    pub file_ending: String,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else {
        EXIT_DOMAIN
    }
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
        }
    };
    let pool = match cli.jobs {
        Some(0) => {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_DOMAIN;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_DOMAIN;
        }
    };
    match pool.install(|| commands::dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
