//! Argument handling for the `hardmb` binary.
//!
//! Every option can come from a TOML file (`--config`, keys spelled like the
//! long flags) or from the command line; flags win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use hardmb::harness::{DatasetSource, Dtype, ExperimentSpec};
use hardmb::metrics::DEFAULT_CONVERGENCE_TOLERANCE;
use hardmb::optim::{DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM};
use hardmb::train::{DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS};
use hardmb::Error;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "HARDMB_OUT";
pub const DEFAULT_OUT: &str = "runs";

pub const SYNTH_SAMPLES: usize = 8000;
pub const SYNTH_FRACTIONS: [f64; 2] = [0.95, 0.05];
pub const SYNTH_DIM: usize = 16;
pub const SYNTH_SEPARATION: f64 = 1.5;
pub const SYNTH_NOISE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Csv,
    Idx,
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtypeArg {
    F32,
    F64,
}

/// Options shared by the command line and the config file. `None` (or an
/// empty list, or `false`) means "not given here".
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetKind>,
    #[arg(long)]
    pub csv_path: Option<PathBuf>,
    #[arg(long)]
    pub csv_test_path: Option<PathBuf>,
    /// Label column: index or header name (default 0).
    #[arg(long)]
    pub csv_label: Option<String>,
    /// The CSV files have no header row.
    #[arg(long)]
    pub csv_no_header: bool,
    #[arg(long)]
    pub idx_images: Option<PathBuf>,
    #[arg(long)]
    pub idx_labels: Option<PathBuf>,
    #[arg(long)]
    pub idx_test_images: Option<PathBuf>,
    #[arg(long)]
    pub idx_test_labels: Option<PathBuf>,
    /// Class fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub synth_fractions: Vec<f64>,
    #[arg(long)]
    pub synth_samples: Option<usize>,
    #[arg(long)]
    pub synth_dim: Option<usize>,
    #[arg(long)]
    pub synth_separation: Option<f64>,
    #[arg(long)]
    pub synth_noise: Option<f64>,
    /// Fixed data seed; by default each run seed also draws the data.
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// Layer sizes including input and output, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fraction of batches trained per round; repeat for a sweep.
    #[arg(long)]
    pub delta: Vec<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Run seed; repeat for several.
    #[arg(long)]
    pub seed: Vec<u64>,
    /// Convergence tolerance relative to the run minimum.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub eval_every_round: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report_delta_e: bool,
    /// Replace an existing non-empty output directory.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum)]
    pub dtype: Option<DtypeArg>,
}

#[derive(Debug, Parser)]
#[command(
    name = "hardmb",
    version,
    about = "Mini-batch training with loss-ranked batch selection"
)]
pub struct Cli {
    /// TOML file with default option values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, `--help` or `--version`.
    Clap(clap::Error),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Clap(e) => e.fmt(f),
            CliError::Run(e) => e.fmt(f),
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config(_) | Error::Comparison(_) => 1,
        Error::Divergence { .. } => 3,
        _ => 2,
    }
}

pub fn read_options(path: &Path) -> Result<Options, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| Error::Usage(format!("config {}: {}", path.display(), e.message())))
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn pick_vec<T>(flag: Vec<T>, file: Vec<T>) -> Vec<T> {
    if flag.is_empty() { file } else { flag }
}

/// `flags` layered over `file`.
pub fn merge(flags: Options, file: Options) -> Options {
    Options {
        dataset: pick(flags.dataset, file.dataset),
        csv_path: pick(flags.csv_path, file.csv_path),
        csv_test_path: pick(flags.csv_test_path, file.csv_test_path),
        csv_label: pick(flags.csv_label, file.csv_label),
        csv_no_header: flags.csv_no_header || file.csv_no_header,
        idx_images: pick(flags.idx_images, file.idx_images),
        idx_labels: pick(flags.idx_labels, file.idx_labels),
        idx_test_images: pick(flags.idx_test_images, file.idx_test_images),
        idx_test_labels: pick(flags.idx_test_labels, file.idx_test_labels),
        synth_fractions: pick_vec(flags.synth_fractions, file.synth_fractions),
        synth_samples: pick(flags.synth_samples, file.synth_samples),
        synth_dim: pick(flags.synth_dim, file.synth_dim),
        synth_separation: pick(flags.synth_separation, file.synth_separation),
        synth_noise: pick(flags.synth_noise, file.synth_noise),
        synth_seed: pick(flags.synth_seed, file.synth_seed),
        layers: pick_vec(flags.layers, file.layers),
        epochs: pick(flags.epochs, file.epochs),
        batch_size: pick(flags.batch_size, file.batch_size),
        delta: pick_vec(flags.delta, file.delta),
        lr: pick(flags.lr, file.lr),
        momentum: pick(flags.momentum, file.momentum),
        seed: pick_vec(flags.seed, file.seed),
        tau: pick(flags.tau, file.tau),
        eval_every_round: flags.eval_every_round || file.eval_every_round,
        out: pick(flags.out, file.out),
        report_delta_e: flags.report_delta_e || file.report_delta_e,
        force: flags.force || file.force,
        dtype: pick(flags.dtype, file.dtype),
    }
}

fn required(v: Option<PathBuf>, flag: &str) -> Result<PathBuf, Error> {
    v.ok_or_else(|| Error::Usage(format!("--{flag} is required for this dataset")))
}

fn dataset_source(o: &Options) -> Result<DatasetSource, Error> {
    let kind = o.dataset.ok_or_else(|| {
        Error::Usage("no dataset given (use --dataset csv|idx|synth)".into())
    })?;
    Ok(match kind {
        DatasetKind::Csv => DatasetSource::Csv {
            path: required(o.csv_path.clone(), "csv-path")?,
            test_path: o.csv_test_path.clone(),
            has_header: !o.csv_no_header,
            label: o.csv_label.clone().unwrap_or_else(|| "0".into()),
        },
        DatasetKind::Idx => DatasetSource::Idx {
            images: required(o.idx_images.clone(), "idx-images")?,
            labels: required(o.idx_labels.clone(), "idx-labels")?,
            test_images: o.idx_test_images.clone(),
            test_labels: o.idx_test_labels.clone(),
        },
        DatasetKind::Synth => DatasetSource::Synth {
            n_samples: o.synth_samples.unwrap_or(SYNTH_SAMPLES),
            fractions: if o.synth_fractions.is_empty() {
                SYNTH_FRACTIONS.to_vec()
            } else {
                o.synth_fractions.clone()
            },
            dim: o.synth_dim.unwrap_or(SYNTH_DIM),
            separation: o.synth_separation.unwrap_or(SYNTH_SEPARATION),
            noise: o.synth_noise.unwrap_or(SYNTH_NOISE),
            seed: o.synth_seed,
        },
    })
}

/// Fills defaults and validates.
pub fn resolve(o: Options, default_out: &Path) -> Result<ExperimentSpec, Error> {
    let spec = ExperimentSpec {
        dataset: dataset_source(&o)?,
        layers: (!o.layers.is_empty()).then(|| o.layers.clone()),
        epochs: o.epochs.unwrap_or(DEFAULT_EPOCHS),
        batch_size: o.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
        learning_rate: o.lr.unwrap_or(DEFAULT_LEARNING_RATE),
        momentum: o.momentum.unwrap_or(DEFAULT_MOMENTUM),
        eval_every_round: o.eval_every_round,
        deltas: if o.delta.is_empty() { vec![1.0] } else { o.delta },
        seeds: if o.seed.is_empty() { vec![1] } else { o.seed },
        tau: o.tau.unwrap_or(DEFAULT_CONVERGENCE_TOLERANCE),
        dtype: match o.dtype {
            Some(DtypeArg::F64) => Dtype::F64,
            _ => Dtype::F32,
        },
        out_dir: o.out.unwrap_or_else(|| default_out.to_path_buf()),
        report_delta_e: o.report_delta_e,
        force: o.force,
    };
    spec.validate()?;
    Ok(spec)
}

/// Output root when `--out` is not given: `$HARDMB_OUT`, else `runs`.
pub fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Parses `argv` (program name first) into a validated spec.
pub fn parse_config<I, S>(argv: I, default_out: &Path) -> Result<ExperimentSpec, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let file = match &cli.config {
        Some(p) => read_options(p)?,
        None => Options::default(),
    };
    Ok(resolve(merge(cli.options, file), default_out)?)
}
