//! Frontier scoring: the MTN heuristic and classical classifiers over
//! feature vectors. Every classifier returns a score in [0, 1]; selection
//! only ever takes an argmax, so scores need to be comparable, not
//! calibrated.

mod knn;
mod rf;

pub use knn::{knn_train, KnnModel};
pub use rf::{rf_train, RandomForest};

use crate::crawl::CrawlState;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::graph::NodeId;

pub const DEFAULT_KNN_K: usize = 30;
pub const DEFAULT_RF_TREES: usize = 100;

/// Where a training batch came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Historical,
    Boosted,
}

/// Labeled feature vectors for classical predictors.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub samples: Vec<(FeatureVector, bool)>,
    pub provenance: Provenance,
}

impl TrainingSet {
    pub fn new(samples: Vec<(FeatureVector, bool)>, provenance: Provenance) -> Result<Self> {
        if let Some((first, _)) = samples.first() {
            let dim = first.len();
            if let Some((bad, _)) = samples.iter().find(|(fv, _)| fv.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: bad.len(),
                });
            }
        }
        Ok(Self {
            samples,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |(fv, _)| fv.len())
    }
}

/// Maximal-target-neighbors heuristic: the raw count of crawled target
/// neighbors. Not normalized — selection is argmax-only and invariant to
/// monotone rescaling.
pub fn mtn_score(state: &CrawlState, v: NodeId) -> f64 {
    state.target_neighbor_count(v) as f64
}
