use super::MetricsRecord;
use crate::{Error, Result};

/// Percentage change of the convergence epoch against the baseline, relative
/// to the compared run: `100 · (e_base − e_delta) / e_delta`. Positive means
/// the compared run converged sooner.
pub fn compute_delta_e(e_base: f64, e_delta: f64) -> Result<f64> {
    if !(e_base > 0.0 && e_delta > 0.0) {
        return Err(Error::Data(format!(
            "convergence epochs must be positive, got {e_base} and {e_delta}"
        )));
    }
    Ok(100.0 * (e_base - e_delta) / e_delta)
}

/// Mean time per back-propagation of a run and its difference to a baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaT {
    pub per_iter: f64,
    pub vs_baseline: f64,
}

/// Total training seconds divided by total back-propagations, read from the
/// last record of the run.
pub fn mean_iter_seconds(records: &[MetricsRecord]) -> Result<f64> {
    let last = records
        .last()
        .ok_or_else(|| Error::Data("no records to time".into()))?;
    if last.backprop_count == 0 {
        return Err(Error::Data("run has no back-propagations".into()));
    }
    Ok(last.wall_seconds / last.backprop_count as f64)
}

pub fn compute_delta_t(records: &[MetricsRecord], baseline: &[MetricsRecord]) -> Result<DeltaT> {
    let per_iter = mean_iter_seconds(records)?;
    Ok(DeltaT {
        per_iter,
        vs_baseline: per_iter - mean_iter_seconds(baseline)?,
    })
}
