//! Random forest with Gini-impurity decision trees.
//!
//! Each tree is fit on a bootstrap resample, considering √dim randomly
//! chosen features per split, and is grown until leaves are pure (or no
//! split improves impurity). Given the same data order and seed the forest
//! is bit-identical; trees are fit in parallel from per-tree derived seeds.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TrainingSet;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Clone, Debug)]
enum TreeNode {
    Leaf {
        vote: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn vote(&self, x: &[f64]) -> bool {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { vote } => return *vote,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomForest {
    trees: Vec<Tree>,
    dim: usize,
}

/// Fits `n_trees` trees. Degenerate inputs (single class, single sample)
/// yield a constant forest rather than an error.
pub fn rf_train(data: &TrainingSet, n_trees: usize, seed: u64) -> Result<RandomForest> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if n_trees == 0 {
        return Err(Error::InvalidParameter("rf needs >= 1 tree".into()));
    }
    let points: Vec<&[f64]> = data.samples.iter().map(|(fv, _)| fv.values.as_slice()).collect();
    let labels: Vec<bool> = data.samples.iter().map(|(_, l)| *l).collect();
    let dim = data.dim();
    let n_features = ((dim as f64).sqrt() as usize).max(1);
    let trees: Vec<Tree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[t as u64]));
            let sample: Vec<usize> = (0..points.len())
                .map(|_| rng.random_range(0..points.len()))
                .collect();
            let mut builder = TreeBuilder {
                points: &points,
                labels: &labels,
                dim,
                n_features,
                rng,
                nodes: Vec::new(),
            };
            builder.build(sample);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();
    Ok(RandomForest { trees, dim })
}

struct TreeBuilder<'a> {
    points: &'a [&'a [f64]],
    labels: &'a [bool],
    dim: usize,
    n_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `indices`, returning its node id.
    fn build(&mut self, indices: Vec<usize>) -> usize {
        let pos = indices.iter().filter(|&&i| self.labels[i]).count();
        let n = indices.len();
        if pos == 0 || pos == n || n < 2 {
            return self.leaf(pos, n);
        }
        match self.best_split(&indices) {
            Some((feature, threshold)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| self.points[i][feature] <= threshold);
                let at = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { vote: false }); // placeholder
                let left = self.build(left_idx);
                let right = self.build(right_idx);
                self.nodes[at] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                at
            }
            None => self.leaf(pos, n),
        }
    }

    fn leaf(&mut self, pos: usize, n: usize) -> usize {
        self.nodes.push(TreeNode::Leaf {
            vote: pos * 2 > n, // majority; ties vote non-target
        });
        self.nodes.len() - 1
    }

    /// Best (feature, threshold) by Gini impurity over a random feature
    /// subset; `None` when no candidate separates the node.
    fn best_split(&mut self, indices: &[usize]) -> Option<(usize, f64)> {
        let n = indices.len() as f64;
        let pos = indices.iter().filter(|&&i| self.labels[i]).count() as f64;
        let parent = gini(pos, n);

        // Sample n_features distinct feature ids (partial Fisher-Yates).
        let mut feats: Vec<usize> = (0..self.dim).collect();
        for i in 0..self.n_features.min(self.dim) {
            let j = self.rng.random_range(i..self.dim);
            feats.swap(i, j);
        }
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut order: Vec<usize> = indices.to_vec();
        for &f in feats.iter().take(self.n_features.min(self.dim)) {
            order.sort_by(|&a, &b| self.points[a][f].total_cmp(&self.points[b][f]));
            let mut left_n = 0.0;
            let mut left_pos = 0.0;
            for w in 0..order.len() - 1 {
                let i = order[w];
                left_n += 1.0;
                if self.labels[i] {
                    left_pos += 1.0;
                }
                let (a, b) = (self.points[i][f], self.points[order[w + 1]][f]);
                if a == b {
                    continue;
                }
                let right_n = n - left_n;
                let weighted = (left_n * gini(left_pos, left_n)
                    + right_n * gini(pos - left_pos, right_n))
                    / n;
                let gain = parent - weighted;
                if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, (a + b) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

impl RandomForest {
    /// Fraction of trees voting target.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let votes = self.trees.iter().filter(|t| t.vote(x)).count();
        Ok(votes as f64 / self.trees.len() as f64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[cfg(test)]
    fn reverse_trees(&mut self) {
        self.trees.reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::predictors::Provenance;

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
    fn all_target_training_is_constant_one() {
        let data = set(&[(vec![0.1, 0.2], true), (vec![0.8, 0.4], true)]);
        let m = rf_train(&data, 25, 3).unwrap();
        assert_eq!(m.score(&[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn same_seed_same_forest() {
        let pts: Vec<(Vec<f64>, bool)> = (0..30)
            .map(|i| (vec![(i % 7) as f64 / 7.0, (i % 3) as f64 / 3.0], i % 2 == 0))
            .collect();
        let data = set(&pts);
        let a = rf_train(&data, 50, 9).unwrap();
        let b = rf_train(&data, 50, 9).unwrap();
        for q in [&[0.1, 0.9][..], &[0.6, 0.2], &[0.3, 0.3]] {
            assert_eq!(a.score(q).unwrap(), b.score(q).unwrap());
        }
        let c = rf_train(&data, 50, 10).unwrap();
        // different seed is allowed to differ (and in practice does)
        let _ = c;
    }

    #[test]
    fn separable_data_fits_training_set() {
        // class = x0 > 0.5, 20 points
        let pts: Vec<(Vec<f64>, bool)> = (0..20)
            .map(|i| {
                let x = i as f64 / 19.0;
                (vec![x, (i % 5) as f64 / 5.0], x > 0.5)
            })
            .collect();
        let data = set(&pts);
        let m = rf_train(&data, 100, 21).unwrap();
        let correct = pts
            .iter()
            .filter(|(p, l)| (m.score(p).unwrap() >= 0.5) == *l)
            .count();
        assert!(correct as f64 / 20.0 >= 0.95, "train accuracy {correct}/20");
    }

    #[test]
    fn score_invariant_under_tree_reordering() {
        let pts: Vec<(Vec<f64>, bool)> = (0..40)
            .map(|i| (vec![(i % 11) as f64 / 11.0, (i % 6) as f64 / 6.0], i % 3 == 0))
            .collect();
        let data = set(&pts);
        let m = rf_train(&data, 60, 5).unwrap();
        let mut rev = m.clone();
        rev.reverse_trees();
        for q in [&[0.2, 0.8][..], &[0.9, 0.1]] {
            assert_eq!(m.score(q).unwrap(), rev.score(q).unwrap());
        }
    }

    #[test]
    fn degenerate_single_sample_is_constant() {
        let data = set(&[(vec![0.5], true)]);
        let m = rf_train(&data, 10, 0).unwrap();
        assert_eq!(m.score(&[0.0]).unwrap(), 1.0);
    }
}
