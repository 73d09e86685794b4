//! Experiment runner: δ-sweeps over seeds, per-run artifacts, and the
//! cross-run comparison table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_csv, load_idx, make_batches, split_train_test, synth_imbalanced_blobs, BatchPlan,
    CsvSchema, Dataset, LabelColumn, Standardizer, SynthSpec,
};
use crate::metrics::{
    compute_delta_e, detect_convergence_epoch, emit_csv, emit_summary, mean_iter_seconds,
    RunSummary,
};
use crate::nn::init_network;
use crate::train::{check_delta, train, RecordingSink, RoundEvent, RunOutcome, TrainConfig};
use crate::{Error, Result, Scalar};

/// Test share used when a loader has no separate test files.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        test_path: Option<PathBuf>,
        has_header: bool,
        /// Column index, or a header name.
        label: String,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        test_images: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
    },
    Synth {
        n_samples: usize,
        fractions: Vec<f64>,
        dim: usize,
        separation: f64,
        noise: f64,
        /// Fixed data seed; when absent each run seed also seeds the data.
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl DatasetSource {
    pub fn tag(&self) -> String {
        match self {
            DatasetSource::Csv { path, .. } => format!("csv:{}", path.display()),
            DatasetSource::Idx { images, .. } => format!("idx:{}", images.display()),
            DatasetSource::Synth {
                n_samples,
                fractions,
                dim,
                separation,
                noise,
                seed,
            } => {
                let fr: Vec<String> = fractions.iter().map(f64::to_string).collect();
                let seed = seed.map_or_else(|| "run".to_string(), |s| s.to_string());
                format!(
                    "synth:n={n_samples},fractions={},d={dim},sep={separation},noise={noise},seed={seed}",
                    fr.join("/")
                )
            }
        }
    }

    /// Standardized `(train, test)` for a run seed.
    pub fn load<T: Scalar>(&self, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
        let (mut train, mut test) = match self {
            DatasetSource::Csv {
                path,
                test_path,
                has_header,
                label,
            } => {
                let schema = CsvSchema {
                    has_header: *has_header,
                    label: label
                        .parse()
                        .map(LabelColumn::Index)
                        .unwrap_or_else(|_| LabelColumn::Name(label.clone())),
                };
                let all = load_csv::<T>(path, &schema)?;
                match test_path {
                    Some(tp) => {
                        let mut test = load_csv::<T>(tp, &schema)?;
                        test.split = crate::data::Split::Test;
                        if test.class_values != all.class_values {
                            return Err(Error::Data(
                                "train and test CSV files have different label sets".into(),
                            ));
                        }
                        (all, test)
                    }
                    None => split_train_test(&all, DEFAULT_TEST_FRACTION, seed)?,
                }
            }
            DatasetSource::Idx {
                images,
                labels,
                test_images,
                test_labels,
            } => {
                let all = load_idx::<T>(images, labels)?;
                match (test_images, test_labels) {
                    (Some(ti), Some(tl)) => {
                        let mut test = load_idx::<T>(ti, tl)?;
                        test.split = crate::data::Split::Test;
                        let c = all.num_classes.max(test.num_classes);
                        let widen = |d: Dataset<T>| {
                            Dataset::new(d.features, d.labels, c, d.split)
                        };
                        (widen(all)?, widen(test)?)
                    }
                    (None, None) => split_train_test(&all, DEFAULT_TEST_FRACTION, seed)?,
                    _ => {
                        return Err(Error::Usage(
                            "IDX test images and labels must be given together".into(),
                        ))
                    }
                }
            }
            DatasetSource::Synth {
                n_samples,
                fractions,
                dim,
                separation,
                noise,
                seed: data_seed,
            } => synth_imbalanced_blobs(&SynthSpec {
                n_samples: *n_samples,
                class_fractions: fractions.clone(),
                dim: *dim,
                class_separation: *separation,
                noise: *noise,
                seed: data_seed.unwrap_or(seed),
            })?,
        };
        let s = Standardizer::fit(&train);
        s.apply(&mut train)?;
        s.apply(&mut test)?;
        Ok((train, test))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

/// A full sweep definition: every `(δ, seed)` pair is one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    /// Full layer sizes including input and output; derived from the data
    /// (`[d, 32, C]`) when absent.
    #[serde(default)]
    pub layers: Option<Vec<usize>>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub eval_every_round: bool,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub tau: f64,
    #[serde(default)]
    pub dtype: Dtype,
    pub out_dir: PathBuf,
    pub report_delta_e: bool,
    pub force: bool,
}

pub const DEFAULT_HIDDEN: usize = 32;

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(Error::Usage("at least one delta is required".into()));
        }
        for &d in &self.deltas {
            check_delta(d).map_err(|_| Error::Usage("delta must be in (0,1]".into()))?;
        }
        if self.seeds.is_empty() {
            return Err(Error::Usage("at least one seed is required".into()));
        }
        if self.report_delta_e && !self.has_baseline() {
            return Err(Error::Usage(
                "reporting delta-e needs a baseline run with delta 1.0".into(),
            ));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::Usage(format!("tau must be non-negative, got {}", self.tau)));
        }
        self.train_config(0, 1.0)
            .validate()
            .map_err(|e| Error::Usage(e.to_string()))
    }

    pub fn has_baseline(&self) -> bool {
        self.deltas.contains(&1.0)
    }

    pub fn train_config(&self, seed: u64, delta: f64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            delta,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            seed,
            eval_every_round: self.eval_every_round,
        }
    }

    fn resolve_layers(&self, dim: usize, classes: usize) -> Result<Vec<usize>> {
        match &self.layers {
            None => Ok(vec![dim, DEFAULT_HIDDEN, classes]),
            Some(l) if l.len() >= 2 && l[0] == dim && l[l.len() - 1] == classes => Ok(l.clone()),
            Some(l) => Err(Error::Config(format!(
                "layers {l:?} must start at {dim} inputs and end at {classes} classes"
            ))),
        }
    }
}

pub fn run_id(delta: f64, seed: u64) -> String {
    format!("delta-{delta}_seed-{seed}")
}

/// Result of one `(δ, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run_id: String,
    pub delta: f64,
    pub seed: u64,
    pub dir: PathBuf,
    /// `None` when the run diverged.
    pub summary: Option<RunSummary>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub runs: Vec<RunReport>,
    pub comparison: Option<ComparisonTable>,
}

impl ExperimentReport {
    pub fn diverged(&self) -> bool {
        self.runs.iter().any(|r| r.failure.is_some())
    }
}

pub const RECORDS_FILE: &str = "records.csv";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const FAILURE_FILE: &str = "FAILED";
pub const RESOLVED_SPEC_FILE: &str = "experiment.toml";
pub const COMPARISON_FILE: &str = "comparison.csv";

fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::Usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_rounds(path: &Path, rounds: &[RoundEvent]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record([
        "round_index",
        "backprop_count",
        "selected",
        "test_loss",
        "test_top1",
    ])
    .map_err(io)?;
    for r in rounds {
        let ids: Vec<String> = r.selected.iter().map(usize::to_string).collect();
        let (loss, top1) = r
            .test
            .map_or((String::new(), String::new()), |t| (t.loss.to_string(), t.top1.to_string()));
        w.write_record([
            r.round_index.to_string(),
            r.backprop_count.to_string(),
            ids.join(" "),
            loss,
            top1,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct Finished {
    sink: RecordingSink,
    outcome: std::result::Result<RunOutcome, Error>,
    layers: Vec<usize>,
}

fn run_one<T: Scalar>(
    spec: &ExperimentSpec,
    plan: &BatchPlan<T>,
    seed: u64,
    delta: f64,
) -> Result<Finished> {
    let layers = spec.resolve_layers(plan.dim(), plan.num_classes())?;
    let mut net = init_network::<T>(&layers, seed)?;
    let mut sink = RecordingSink::default();
    let outcome = train(&mut net, plan, &spec.train_config(seed, delta), &mut sink);
    Ok(Finished {
        sink,
        outcome,
        layers,
    })
}

/// Summary of a finished run, without `Δe` (filled in against the baseline).
pub fn summarize(
    spec: &ExperimentSpec,
    delta: f64,
    seed: u64,
    layers: &[usize],
    plan_sizes: (usize, usize),
    sink: &RecordingSink,
    outcome: &RunOutcome,
) -> Result<RunSummary> {
    let last = sink
        .records
        .last()
        .ok_or_else(|| Error::Data("run produced no records".into()))?;
    let layers: Vec<String> = layers.iter().map(usize::to_string).collect();
    Ok(RunSummary {
        run_id: run_id(delta, seed),
        delta,
        seed,
        dataset: spec.dataset.tag(),
        layers: layers.join(","),
        epochs: spec.epochs,
        batch_size: spec.batch_size,
        learning_rate: spec.learning_rate,
        momentum: spec.momentum,
        tau: spec.tau,
        num_train_batches: plan_sizes.0,
        num_test_batches: plan_sizes.1,
        selection_size: outcome.schedule.selection_size,
        zeta: outcome.schedule.zeta,
        backprop_count: outcome.backprop_count,
        convergence_epoch: detect_convergence_epoch(&sink.records, spec.tau)?,
        final_train_loss: last.train_loss,
        final_train_top1: last.train_top1,
        final_test_loss: last.test_loss,
        final_test_top1: last.test_top1,
        mean_iter_seconds: mean_iter_seconds(&sink.records)?,
        train_seconds: outcome.train_seconds,
        sort_seconds: outcome.sort_seconds,
        delta_e: None,
        delta_dt: None,
    })
}

fn run_seed<T: Scalar>(spec: &ExperimentSpec, seed: u64) -> Result<Vec<RunReport>> {
    let (train_set, test_set) = spec.dataset.load::<T>(seed)?;
    let plan = make_batches(&train_set, &test_set, spec.batch_size, seed)?;
    let sizes = (plan.num_train_batches(), plan.num_test_batches());

    let mut reports = Vec::new();
    for &delta in &spec.deltas {
        let id = run_id(delta, seed);
        let dir = spec.out_dir.join(&id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let done = run_one(spec, &plan, seed, delta)?;
        emit_csv(dir.join(RECORDS_FILE), &id, delta, seed, &done.sink.records)?;
        if delta < 1.0 {
            write_rounds(&dir.join(ROUNDS_FILE), &done.sink.rounds)?;
        }
        let (summary, failure) = match &done.outcome {
            Ok(outcome) => (
                Some(summarize(spec, delta, seed, &done.layers, sizes, &done.sink, outcome)?),
                None,
            ),
            Err(e @ Error::Divergence { .. }) => {
                let msg = e.to_string();
                let marker = dir.join(FAILURE_FILE);
                fs::write(&marker, format!("{msg}\n")).map_err(|e| Error::io(&marker, e))?;
                (None, Some(msg))
            }
            Err(e) => return Err(Error::Config(e.to_string())),
        };
        reports.push(RunReport {
            run_id: id,
            delta,
            seed,
            dir,
            summary,
            failure,
        });
    }

    // Δe and Δ(Δt) against this seed's baseline
    let baseline = reports
        .iter()
        .find(|r| r.delta == 1.0)
        .and_then(|r| r.summary.clone());
    for r in &mut reports {
        if let (Some(s), Some(b)) = (r.summary.as_mut(), baseline.as_ref()) {
            s.delta_e = Some(compute_delta_e(b.convergence_epoch, s.convergence_epoch)?);
            s.delta_dt = Some(s.mean_iter_seconds - b.mean_iter_seconds);
        }
        if let Some(s) = &r.summary {
            emit_summary(r.dir.join(SUMMARY_FILE), s)?;
        }
    }
    Ok(reports)
}

/// Runs every `(δ, seed)` pair of the sweep and writes, under `out_dir`:
/// the resolved spec, one directory per run with `records.csv` and
/// `summary.toml` (plus `rounds.csv` for δ < 1, or `FAILED` on divergence),
/// and `comparison.csv` when a δ = 1 baseline is part of the sweep.
///
/// All runs of a seed share one batch plan and one initial network.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    prepare_out_dir(&spec.out_dir, spec.force)?;
    let echo = toml::to_string(spec).map_err(|e| Error::Format(e.to_string()))?;
    let echo_path = spec.out_dir.join(RESOLVED_SPEC_FILE);
    fs::write(&echo_path, echo).map_err(|e| Error::io(&echo_path, e))?;

    let mut runs = Vec::new();
    for &seed in &spec.seeds {
        runs.extend(match spec.dtype {
            Dtype::F32 => run_seed::<f32>(spec, seed)?,
            Dtype::F64 => run_seed::<f64>(spec, seed)?,
        });
    }

    let comparison = if spec.has_baseline() {
        let summaries: Vec<RunSummary> = runs.iter().filter_map(|r| r.summary.clone()).collect();
        match compare_runs(&summaries) {
            Ok(table) => {
                table.emit(spec.out_dir.join(COMPARISON_FILE))?;
                Some(table)
            }
            // every baseline run diverged
            Err(Error::Comparison(_)) if runs.iter().any(|r| r.failure.is_some()) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(ExperimentReport { runs, comparison })
}

/// Mean and normal-approximation 95% half-width (`1.96·s/√n`, sample
/// standard deviation; zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanHw {
    pub mean: f64,
    pub half_width: f64,
}

impl MeanHw {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let half_width = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * var.sqrt() / n.sqrt()
        };
        Self { mean, half_width }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub delta: f64,
    pub seeds: usize,
    pub train_top1: MeanHw,
    pub test_top1: MeanHw,
    pub convergence_epoch: MeanHw,
    /// `Δe` of the mean convergence epochs against the baseline row.
    pub delta_e: f64,
    pub mean_iter_seconds: MeanHw,
    pub delta_dt: f64,
}

/// Rows ordered by descending δ, so the baseline comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub const COMPARISON_COLUMNS: [&str; 13] = [
    "delta",
    "seeds",
    "train_top1_mean",
    "train_top1_hw",
    "test_top1_mean",
    "test_top1_hw",
    "e_mean",
    "e_hw",
    "delta_e",
    "dt_mean",
    "dt_hw",
    "delta_dt",
    "baseline",
];

impl ComparisonTable {
    pub fn row(&self, delta: f64) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.delta == delta)
    }

    pub fn emit(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(COMPARISON_COLUMNS).map_err(fmt)?;
        for r in &self.rows {
            w.write_record([
                r.delta.to_string(),
                r.seeds.to_string(),
                format!("{:.2}", r.train_top1.mean),
                format!("{:.2}", r.train_top1.half_width),
                format!("{:.2}", r.test_top1.mean),
                format!("{:.2}", r.test_top1.half_width),
                format!("{:.3}", r.convergence_epoch.mean),
                format!("{:.3}", r.convergence_epoch.half_width),
                format!("{:.2}", r.delta_e),
                format!("{:.6e}", r.mean_iter_seconds.mean),
                format!("{:.6e}", r.mean_iter_seconds.half_width),
                format!("{:.6e}", r.delta_dt),
                (r.delta == 1.0).to_string(),
            ])
            .map_err(fmt)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Groups summaries by δ and compares every group to the δ = 1 group.
pub fn compare_runs(summaries: &[RunSummary]) -> Result<ComparisonTable> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Comparison("no summaries to compare".into()))?;
    for s in summaries {
        if s.epochs != first.epochs
            || s.batch_size != first.batch_size
            || s.dataset != first.dataset
            || s.layers != first.layers
            || s.learning_rate != first.learning_rate
            || s.momentum != first.momentum
        {
            return Err(Error::Comparison(format!(
                "run {} was configured differently from run {}",
                s.run_id, first.run_id
            )));
        }
    }
    // keyed by δ bits; positive floats order like their bit patterns
    let mut groups: BTreeMap<u64, Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry(s.delta.to_bits()).or_default().push(s);
    }
    let stats = |g: &[&RunSummary], f: fn(&RunSummary) -> f64| {
        MeanHw::of(&g.iter().map(|s| f(s)).collect::<Vec<_>>())
    };
    let base = groups
        .get(&1.0f64.to_bits())
        .ok_or_else(|| Error::Comparison("no delta = 1.0 baseline among the runs".into()))?;
    let base_e = stats(base, |s| s.convergence_epoch).mean;
    let base_dt = stats(base, |s| s.mean_iter_seconds).mean;

    let rows = groups
        .values()
        .rev()
        .map(|g| {
            let e = stats(g, |s| s.convergence_epoch);
            let dt = stats(g, |s| s.mean_iter_seconds);
            Ok(ComparisonRow {
                delta: g[0].delta,
                seeds: g.len(),
                train_top1: stats(g, |s| s.final_train_top1),
                test_top1: stats(g, |s| s.final_test_top1),
                convergence_epoch: e,
                delta_e: compute_delta_e(base_e, e.mean)?,
                mean_iter_seconds: dt,
                delta_dt: dt.mean - base_dt,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonTable { rows })
}
