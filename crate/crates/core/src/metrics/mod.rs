//! Accuracy and loss measurement, convergence detection and run reports.

mod convergence;
mod delta;
mod report;

pub use self::convergence::{
    detect_convergence_epoch, plateau_epoch, smooth3, DEFAULT_CONVERGENCE_TOLERANCE,
};
pub use self::delta::{compute_delta_e, compute_delta_t, mean_iter_seconds, DeltaT};
pub use self::report::{
    emit_csv, emit_summary, read_csv, read_summary, CsvRow, RunSummary, RECORD_COLUMNS,
};

use crate::data::MiniBatch;
use crate::nn::{row_losses, Mlp};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// One measurement point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub backprop_count: u64,
    /// `backprop_count / N`.
    pub epoch_equivalent: f64,
    pub train_loss: f64,
    pub train_top1: f64,
    pub test_loss: f64,
    pub test_top1: f64,
    /// Cumulative training time (forward, backward, update and batch
    /// sorting) up to this record. Evaluation time is not included.
    pub wall_seconds: f64,
    /// Selection round in which the record was taken; `None` outside the
    /// round phase of the loss-ranked loop.
    pub round_index: Option<u64>,
}

/// Size-weighted loss and top-1 accuracy (percent) over a set of batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub loss: f64,
    pub top1: f64,
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// Rows whose argmax equals the label.
pub fn count_correct<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(logits.row(i)) == y)
        .count()
}

/// Percentage of rows whose highest logit sits at the label.
pub fn top1_accuracy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    if labels.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            logits.rows()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    Ok(100.0 * count_correct(logits, labels) as f64 / labels.len() as f64)
}

/// Forward-only pass over `batches`. Per-sample losses are summed in `f64`,
/// so the result does not depend on how the samples are grouped.
pub fn evaluate<T: Scalar>(net: &Mlp<T>, batches: &[MiniBatch<T>]) -> Result<EvalResult> {
    let mut loss_sum = 0.0;
    let mut hits = 0usize;
    let mut n = 0usize;
    for b in batches {
        let logits = net.forward(&b.x)?;
        loss_sum += row_losses(&logits, &b.y)?.iter().sum::<f64>();
        hits += count_correct(&logits, &b.y);
        n += b.len();
    }
    if n == 0 {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    Ok(EvalResult {
        loss: loss_sum / n as f64,
        top1: 100.0 * hits as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top1_cases() {
        let l = Tensor::from_rows(&[vec![2.0f32, 1.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(top1_accuracy(&l, &[0, 1]).unwrap(), 100.0);
        assert_eq!(top1_accuracy(&l, &[1, 0]).unwrap(), 0.0);
        assert_eq!(top1_accuracy(&l, &[0, 0]).unwrap(), 50.0);
        let tie = Tensor::from_rows(&[vec![1.0f32, 1.0]]).unwrap();
        assert_eq!(top1_accuracy(&tie, &[0]).unwrap(), 100.0);
        assert_eq!(top1_accuracy(&tie, &[1]).unwrap(), 0.0);
        assert!(top1_accuracy(&tie, &[0, 1]).is_err());
    }
}
