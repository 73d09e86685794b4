use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsRecord;
use crate::{Error, Result};

/// Header of a records CSV, in column order.
pub const RECORD_COLUMNS: [&str; 10] = [
    "run_id",
    "delta",
    "seed",
    "backprop_count",
    "epoch_equivalent",
    "train_loss",
    "train_top1",
    "test_loss",
    "test_top1",
    "wall_seconds",
];

/// One line of a records CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub run_id: String,
    pub delta: f64,
    pub seed: u64,
    pub backprop_count: u64,
    pub epoch_equivalent: f64,
    pub train_loss: f64,
    pub train_top1: f64,
    pub test_loss: f64,
    pub test_top1: f64,
    pub wall_seconds: f64,
}

impl CsvRow {
    pub fn new(run_id: &str, delta: f64, seed: u64, r: &MetricsRecord) -> Self {
        Self {
            run_id: run_id.to_string(),
            delta,
            seed,
            backprop_count: r.backprop_count,
            epoch_equivalent: r.epoch_equivalent,
            train_loss: r.train_loss,
            train_top1: r.train_top1,
            test_loss: r.test_loss,
            test_top1: r.test_top1,
            wall_seconds: r.wall_seconds,
        }
    }

    /// The record this row was written from. The round index is not part of
    /// the CSV and comes back as `None`.
    pub fn record(&self) -> MetricsRecord {
        MetricsRecord {
            backprop_count: self.backprop_count,
            epoch_equivalent: self.epoch_equivalent,
            train_loss: self.train_loss,
            train_top1: self.train_top1,
            test_loss: self.test_loss,
            test_top1: self.test_top1,
            wall_seconds: self.wall_seconds,
            round_index: None,
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            line,
            msg: format!("{kind:?}"),
        },
    }
}

/// Writes the header and one row per record. Floats are written in their
/// shortest exact form.
pub fn emit_csv(
    path: impl AsRef<Path>,
    run_id: &str,
    delta: f64,
    seed: u64,
    records: &[MetricsRecord],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(RECORD_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(CsvRow::new(run_id, delta, seed, r))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?;
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(Error::Format(format!("unexpected records header {headers:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

/// Per-run summary, written as a flat `key = value` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub delta: f64,
    pub seed: u64,
    pub dataset: String,
    pub layers: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub tau: f64,
    pub num_train_batches: usize,
    pub num_test_batches: usize,
    /// Batches trained per selection round (`N` for the traditional loop).
    pub selection_size: usize,
    /// Selection rounds after the warm-up pass (`0` for the traditional loop).
    pub zeta: usize,
    pub backprop_count: u64,
    /// `e`.
    pub convergence_epoch: f64,
    pub final_train_loss: f64,
    pub final_train_top1: f64,
    pub final_test_loss: f64,
    pub final_test_top1: f64,
    /// `Δt`.
    pub mean_iter_seconds: f64,
    pub train_seconds: f64,
    pub sort_seconds: f64,
    /// `Δe` against the baseline run with the same seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<f64>,
    /// `Δt − Δt(baseline)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_dt: Option<f64>,
}

pub fn emit_summary(path: impl AsRef<Path>, summary: &RunSummary) -> Result<()> {
    let path = path.as_ref();
    let text = toml::to_string(summary).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<RunSummary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
