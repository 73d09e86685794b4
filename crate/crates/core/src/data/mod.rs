//! Datasets, loaders, and the fixed mini-batch partition.

mod batch;
mod csv;
mod idx;
mod synth;

pub use self::batch::{make_batches, BatchPlan, MiniBatch};
pub use self::csv::{load_csv, write_csv, CsvSchema, LabelColumn};
pub use self::idx::{load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use self::synth::{synth_imbalanced_blobs, SynthSpec};

use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Labelled samples. `class_values[c]` is the label value that class id `c`
/// had in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Tensor<T>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub class_values: Vec<i64>,
    pub split: Split,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Tensor<T>,
        labels: Vec<usize>,
        num_classes: usize,
        split: Split,
    ) -> Result<Self> {
        let class_values = (0..num_classes as i64).collect();
        Self::with_class_values(features, labels, class_values, split)
    }

    pub fn with_class_values(
        features: Tensor<T>,
        labels: Vec<usize>,
        class_values: Vec<i64>,
        split: Split,
    ) -> Result<Self> {
        let num_classes = class_values.len();
        if features.shape().len() != 2 || features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} labels for features of shape {:?}",
                labels.len(),
                features.shape()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            class_values,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Subset of rows, in the given order.
    pub fn subset(&self, idx: &[usize], split: Split) -> Result<Self> {
        Ok(Self {
            features: self.features.select_rows(idx)?,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            class_values: self.class_values.clone(),
            split,
        })
    }
}

/// Seeded random split into `(train, test)` with `round(n · test_fraction)`
/// test rows (at least one of each).
pub fn split_train_test<T: Scalar>(
    data: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if data.len() < 2 {
        return Err(Error::Data("need at least two samples to split".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((data.len() as f64 * test_fraction).round() as usize).clamp(1, data.len() - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    Ok((
        data.subset(train_idx, Split::Train)?,
        data.subset(test_idx, Split::Test)?,
    ))
}

/// Per-feature standardization fitted on one split and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance features keep a unit scale.
    pub fn fit<T: Scalar>(data: &Dataset<T>) -> Self {
        let (n, d) = (data.len().max(1) as f64, data.dim());
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            for (m, v) in mean.iter_mut().zip(data.features.row(i)) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for ((s, v), m) in var.iter_mut().zip(data.features.row(i)).zip(&mean) {
                *s += (v.as_f64() - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply<T: Scalar>(&self, data: &mut Dataset<T>) -> Result<()> {
        let d = data.dim();
        if d != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} features, data has {d}",
                self.mean.len()
            )));
        }
        for (j, v) in data.features.data_mut().iter_mut().enumerate() {
            let k = j % d;
            *v = T::of((v.as_f64() - self.mean[k]) / self.std[k]);
        }
        Ok(())
    }
}
