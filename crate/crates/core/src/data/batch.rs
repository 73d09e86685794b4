use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Split};
use crate::tensor::{Fnv, Tensor};
use crate::{Error, Result, Scalar};

/// A fixed group of samples. `sample_ids` index rows of the dataset the
/// batch was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch<T> {
    pub id: usize,
    pub x: Tensor<T>,
    pub y: Vec<usize>,
    pub sample_ids: Vec<usize>,
}

impl<T: Scalar> MiniBatch<T> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn checksum(&self) -> u64 {
        let mut h = Fnv::default();
        h.write(self.id as u64);
        h.write(self.x.checksum());
        for &y in &self.y {
            h.write(y as u64);
        }
        h.0
    }
}

/// The `N` training and `M` test mini-batches of a run. Membership is fixed
/// at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan<T> {
    train: Vec<MiniBatch<T>>,
    test: Vec<MiniBatch<T>>,
    batch_size: usize,
    shuffle_seed: u64,
    num_classes: usize,
    dim: usize,
}

impl<T: Scalar> BatchPlan<T> {
    pub fn train_batches(&self) -> &[MiniBatch<T>] {
        &self.train
    }

    pub fn test_batches(&self) -> &[MiniBatch<T>] {
        &self.test
    }

    /// `N`.
    pub fn num_train_batches(&self) -> usize {
        self.train.len()
    }

    /// `M`.
    pub fn num_test_batches(&self) -> usize {
        self.test.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_train_samples(&self) -> usize {
        self.train.iter().map(MiniBatch::len).sum()
    }

    /// Per-batch checksums of the training partition.
    pub fn train_checksums(&self) -> Vec<u64> {
        self.train.iter().map(MiniBatch::checksum).collect()
    }
}

fn partition<T: Scalar>(data: &Dataset<T>, order: &[usize], b: usize) -> Result<Vec<MiniBatch<T>>> {
    order
        .chunks(b)
        .enumerate()
        .map(|(id, idx)| {
            Ok(MiniBatch {
                id,
                x: data.features.select_rows(idx)?,
                y: idx.iter().map(|&i| data.labels[i]).collect(),
                sample_ids: idx.to_vec(),
            })
        })
        .collect()
}

/// Shuffles the training set once with `shuffle_seed` and cuts it into
/// `ceil(n / B)` contiguous batches; the last one keeps its natural size.
/// The test set is cut in its stored order.
pub fn make_batches<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    batch_size: usize,
    shuffle_seed: u64,
) -> Result<BatchPlan<T>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if batch_size > train.len() {
        return Err(Error::Config(format!(
            "batch size {batch_size} exceeds {} training samples",
            train.len()
        )));
    }
    if test.is_empty() {
        return Err(Error::Data("test split is empty".into()));
    }
    if train.dim() != test.dim() || train.num_classes != test.num_classes {
        return Err(Error::Data(format!(
            "train has {} features / {} classes, test has {} / {}",
            train.dim(),
            train.num_classes,
            test.dim(),
            test.num_classes
        )));
    }
    debug_assert_eq!(train.split, Split::Train);
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    let test_order: Vec<usize> = (0..test.len()).collect();
    Ok(BatchPlan {
        train: partition(train, &order, batch_size)?,
        test: partition(test, &test_order, batch_size)?,
        batch_size,
        shuffle_seed,
        num_classes: train.num_classes,
        dim: train.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(n: usize, split: Split) -> Dataset<f32> {
        let f = Tensor::from_vec(&[n, 2], (0..2 * n).map(|v| v as f32).collect()).unwrap();
        Dataset::new(f, (0..n).map(|i| i % 3).collect(), 3, split).unwrap()
    }

    #[test]
    fn ceiling_partition_sizes() {
        let plan = make_batches(&dataset(100, Split::Train), &dataset(10, Split::Test), 32, 1).unwrap();
        let sizes: Vec<usize> = plan.train_batches().iter().map(MiniBatch::len).collect();
        assert_eq!(sizes, vec![32, 32, 32, 4]);
        assert_eq!(plan.num_test_batches(), 1);

        let plan = make_batches(&dataset(96, Split::Train), &dataset(65, Split::Test), 32, 1).unwrap();
        assert_eq!(plan.num_train_batches(), 3);
        assert!(plan.train_batches().iter().all(|b| b.len() == 32));
        assert_eq!(plan.num_test_batches(), 3);
    }

    #[test]
    fn every_sample_once_with_its_label() {
        let train = dataset(101, Split::Train);
        let plan = make_batches(&train, &dataset(5, Split::Test), 8, 99).unwrap();
        let mut seen = vec![0; 101];
        for (k, b) in plan.train_batches().iter().enumerate() {
            assert_eq!(b.id, k);
            for (r, &s) in b.sample_ids.iter().enumerate() {
                seen[s] += 1;
                assert_eq!(b.y[r], train.labels[s]);
                assert_eq!(b.x.row(r), train.features.row(s));
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn shuffle_is_seeded_and_test_is_not_shuffled() {
        let (tr, te) = (dataset(50, Split::Train), dataset(20, Split::Test));
        let a = make_batches(&tr, &te, 10, 3).unwrap();
        let b = make_batches(&tr, &te, 10, 3).unwrap();
        let c = make_batches(&tr, &te, 10, 4).unwrap();
        assert_eq!(a.train_checksums(), b.train_checksums());
        assert_ne!(a.train_checksums(), c.train_checksums());
        assert_eq!(a.test_batches()[1].sample_ids, (10..20).collect::<Vec<_>>());
    }

    #[test]
    fn batch_size_bounds() {
        let (tr, te) = (dataset(10, Split::Train), dataset(2, Split::Test));
        assert!(matches!(make_batches(&tr, &te, 11, 0), Err(Error::Config(_))));
        assert!(matches!(make_batches(&tr, &te, 0, 0), Err(Error::Config(_))));
        assert_eq!(make_batches(&tr, &te, 10, 0).unwrap().num_train_batches(), 1);
    }
}
