use super::MetricsRecord;
use crate::{Error, Result};

/// Relative distance above the run minimum at which the training loss
/// counts as converged.
pub const DEFAULT_CONVERGENCE_TOLERANCE: f64 = 0.02;

/// Centered three-point moving average. The two end points average over the
/// neighbours they have.
pub fn smooth3(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// First `epochs[i]` whose `smoothed[i]` is within `(1 + tau)` of the
/// series minimum.
pub fn plateau_epoch(epochs: &[f64], smoothed: &[f64], tau: f64) -> Result<f64> {
    if epochs.is_empty() || epochs.len() != smoothed.len() {
        return Err(Error::Data(format!(
            "{} epochs for {} loss values",
            epochs.len(),
            smoothed.len()
        )));
    }
    let min = smoothed.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = (1.0 + tau) * min;
    smoothed
        .iter()
        .position(|&v| v <= threshold)
        .map(|i| epochs[i])
        .ok_or_else(|| Error::Data("loss series contains no finite minimum".into()))
}

/// Convergence epoch `e` of a run: the earliest epoch-equivalent at which
/// the smoothed training loss reaches `(1 + tau) · min`.
pub fn detect_convergence_epoch(records: &[MetricsRecord], tau: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Data("no records to detect convergence on".into()));
    }
    if !(tau >= 0.0) {
        return Err(Error::Config(format!("tolerance must be non-negative, got {tau}")));
    }
    let epochs: Vec<f64> = records.iter().map(|r| r.epoch_equivalent).collect();
    let losses: Vec<f64> = records.iter().map(|r| r.train_loss).collect();
    plateau_epoch(&epochs, &smooth3(&losses), tau)
}
