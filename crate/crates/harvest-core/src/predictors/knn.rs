//! Exact k-nearest-neighbors classifier.
//!
//! The contract is exact nearest neighbors under Euclidean distance with
//! distance ties broken by lower sample index. At the training-set sizes the
//! crawler produces (≤ a few hundred points) a bounded-heap scan is both
//! exact and faster than tree structures, so that is what backs the model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::TrainingSet;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct KnnModel {
    k: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<bool>,
    dim: usize,
}

/// Candidate neighbor ordered by (distance², index): the heap keeps the k
/// best, where "worst" is the largest distance with ties going to the higher
/// index.
#[derive(PartialEq)]
struct Neighbor {
    d2: f64,
    idx: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Stores the training points; `k` is clamped to the available sample count
/// at query time.
pub fn knn_train(data: &TrainingSet, k: usize) -> Result<KnnModel> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("knn k must be >= 1".into()));
    }
    Ok(KnnModel {
        k,
        dim: data.dim(),
        points: data
            .samples
            .iter()
            .map(|(fv, _)| fv.values.clone())
            .collect(),
        labels: data.samples.iter().map(|(_, l)| *l).collect(),
    })
}

impl KnnModel {
    /// Fraction of the k nearest training points labeled target.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let k = self.k.min(self.points.len());
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        for (idx, p) in self.points.iter().enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            heap.push(Neighbor { d2, idx });
            if heap.len() > k {
                heap.pop();
            }
        }
        let hits = heap.iter().filter(|n| self.labels[n.idx]).count();
        Ok(hits as f64 / k as f64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::predictors::Provenance;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(points: &[(Vec<f64>, bool)]) -> TrainingSet {
        TrainingSet::new(
            points
                .iter()
                .map(|(v, l)| (FeatureVector { values: v.clone() }, *l))
                .collect(),
            Provenance::Historical,
        )
        .unwrap()
    }

    #[test]
    fn all_target_training_scores_one() {
        let data = set(&[(vec![0.0, 0.0], true), (vec![1.0, 1.0], true)]);
        let m = knn_train(&data, 30).unwrap();
        assert_eq!(m.score(&[0.3, 0.9]).unwrap(), 1.0);
    }

    #[test]
    fn k_clamps_to_available_samples() {
        let pts: Vec<(Vec<f64>, bool)> = (0..10).map(|i| (vec![i as f64], i < 5)).collect();
        let m = knn_train(&set(&pts), 30).unwrap();
        // all 10 points vote
        assert_eq!(m.score(&[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn duplicate_points_with_conflicting_labels_both_count() {
        let data = set(&[(vec![0.5], true), (vec![0.5], false), (vec![9.0], false)]);
        let m = knn_train(&data, 2).unwrap();
        assert_eq!(m.score(&[0.5]).unwrap(), 0.5);
    }

    #[test]
    fn one_nn_at_distance_zero_dominates() {
        let data = set(&[(vec![0.2, 0.4], true), (vec![0.9, 0.9], false)]);
        let m = knn_train(&data, 1).unwrap();
        assert_eq!(m.score(&[0.2, 0.4]).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let data = set(&[(vec![0.0, 0.0], true)]);
        let m = knn_train(&data, 1).unwrap();
        assert!(matches!(
            m.score(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            knn_train(
                &TrainingSet::new(vec![], Provenance::Historical).unwrap(),
                1
            ),
            Err(Error::EmptyTrainingSet)
        ));
    }

    /// Independent oracle: full sort by (distance², index).
    fn brute_force_score(points: &[(Vec<f64>, bool)], x: &[f64], k: usize) -> f64 {
        let mut order: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, (p, _))| {
                (
                    p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                    i,
                )
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = k.min(points.len());
        order[..k].iter().filter(|&&(_, i)| points[i].1).count() as f64 / k as f64
    }

    #[test]
    fn matches_brute_force_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let n = 1 + (trial * 7) % 200;
            let dim = 1 + trial % 27;
            let pts: Vec<(Vec<f64>, bool)> = (0..n)
                .map(|_| {
                    (
                        (0..dim).map(|_| rng.random::<f64>()).collect(),
                        rng.random::<bool>(),
                    )
                })
                .collect();
            let data = set(&pts);
            for k in [1, 5, 30] {
                let m = knn_train(&data, k).unwrap();
                for _ in 0..5 {
                    let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                    assert_eq!(m.score(&q).unwrap(), brute_force_score(&pts, &q, k));
                }
            }
        }
    }
}
