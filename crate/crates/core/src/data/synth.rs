use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Split};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Parameters of an imbalanced Gaussian-blob classification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub class_fractions: Vec<f64>,
    pub dim: usize,
    /// Euclidean distance between any two class centers (exact when the
    /// class count does not exceed `dim`).
    pub class_separation: f64,
    /// Per-coordinate standard deviation around each center.
    pub noise: f64,
    pub seed: u64,
}

/// Fraction of every class that lands in the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let c = self.class_fractions.len();
        if c < 2 {
            return Err(Error::Config("need at least two class fractions".into()));
        }
        if self.class_fractions.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Config(format!(
                "class fractions must be positive, got {:?}",
                self.class_fractions
            )));
        }
        let sum: f64 = self.class_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "class fractions sum to {sum}, expected 1"
            )));
        }
        if self.n_samples < 10 * c {
            return Err(Error::Config(format!(
                "{} samples is fewer than 10 per class",
                self.n_samples
            )));
        }
        if self.dim == 0 || !(self.class_separation >= 0.0) || !(self.noise >= 0.0) {
            return Err(Error::Config(
                "dimension must be positive, separation and noise non-negative".into(),
            ));
        }
        if self.class_counts().iter().any(|&k| k < 2) {
            return Err(Error::Config(
                "every class needs at least two samples to split".into(),
            ));
        }
        Ok(())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.class_fractions
            .iter()
            .map(|f| (f * self.n_samples as f64).round() as usize)
            .collect()
    }
}

/// Class centers with pairwise distance `separation`: an orthonormal set
/// scaled by `separation / √2` when `C ≤ d`, otherwise random directions at
/// radius `separation / 2`.
fn class_centers(c: usize, d: usize, separation: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(c);
    while basis.len() < c {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if c <= d {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let radius = if c <= d {
        separation / std::f64::consts::SQRT_2
    } else {
        separation / 2.0
    };
    basis
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * radius).collect())
        .collect()
}

/// Generates one Gaussian blob per class with `round(fraction · n)` samples
/// each, then splits every class 80/20 into train and test.
pub fn synth_imbalanced_blobs<T: Scalar>(spec: &SynthSpec) -> Result<(Dataset<T>, Dataset<T>)> {
    spec.validate()?;
    let c = spec.class_fractions.len();
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = class_centers(c, d, spec.class_separation, &mut rng);

    let mut train = (Vec::new(), Vec::new());
    let mut test = (Vec::new(), Vec::new());
    for (class, (&count, center)) in spec.class_counts().iter().zip(&centers).enumerate() {
        let mut samples: Vec<Vec<f64>> = (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + spec.noise * z
                    })
                    .collect()
            })
            .collect();
        samples.shuffle(&mut rng);
        let n_train = ((count as f64 * TRAIN_FRACTION).round() as usize).clamp(1, count - 1);
        for (i, s) in samples.into_iter().enumerate() {
            let dst = if i < n_train { &mut train } else { &mut test };
            dst.0.extend(s.into_iter().map(T::of));
            dst.1.push(class);
        }
    }

    let build = |(x, y): (Vec<T>, Vec<usize>), split| {
        let rows = y.len();
        Dataset::new(Tensor::from_vec(&[rows, d], x)?, y, c, split)
    };
    Ok((build(train, Split::Train)?, build(test, Split::Test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(fractions: &[f64], n: usize) -> SynthSpec {
        SynthSpec {
            n_samples: n,
            class_fractions: fractions.to_vec(),
            dim: 4,
            class_separation: 3.0,
            noise: 1.0,
            seed: 11,
        }
    }

    #[test]
    fn minority_count_rounds() {
        let s = spec(&[0.95, 0.05], 1000);
        assert_eq!(s.class_counts(), vec![950, 50]);
        let (tr, te) = synth_imbalanced_blobs::<f32>(&s).unwrap();
        let tot: Vec<usize> = tr
            .class_counts()
            .iter()
            .zip(te.class_counts())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(tot, vec![950, 50]);
        assert_eq!(tr.class_counts(), vec![760, 40]);
        assert_eq!(tr.split, Split::Train);
        assert_eq!(te.split, Split::Test);
    }

    #[test]
    fn deterministic_for_seed() {
        let s = spec(&[0.7, 0.2, 0.1], 300);
        let a = synth_imbalanced_blobs::<f64>(&s).unwrap();
        let b = synth_imbalanced_blobs::<f64>(&s).unwrap();
        assert_eq!(a, b);
        let mut s2 = s.clone();
        s2.seed += 1;
        assert_ne!(a.0, synth_imbalanced_blobs::<f64>(&s2).unwrap().0);
    }

    #[test]
    fn centers_are_separated_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cs = class_centers(3, 5, 10.0, &mut rng);
        for i in 0..3 {
            for j in i + 1..3 {
                let dist = cs[i]
                    .iter()
                    .zip(&cs[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((dist - 10.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_degenerate_fractions() {
        for bad in [
            spec(&[0.5, 0.4], 100),
            spec(&[1.0, 0.0], 100),
            spec(&[1.0], 100),
            spec(&[0.5, 0.5], 10),
            spec(&[-0.5, 1.5], 100),
        ] {
            assert!(matches!(
                synth_imbalanced_blobs::<f32>(&bad),
                Err(Error::Config(_))
            ));
        }
    }
}
