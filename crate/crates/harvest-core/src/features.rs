//! Structural features over the known graph and the classical-predictor
//! feature vectors assembled from them.
//!
//! All features live in [0, 1]. Degree-0 conventions: OD, CNF and TNF are 0
//! when the known degree is 0, CC is 0 below degree 2, and the triangle
//! fractions are all 0 when the node is in no known triangle.

use serde::{Deserialize, Serialize};

use crate::crawl::CrawlState;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Per-node features: observed degree (1/√d), clustering coefficient,
/// crawled-neighbors fraction, target-neighbors fraction, and the fractions
/// of known triangles whose other two vertices include 0/1/2 crawled nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeFeatures {
    pub od: f64,
    pub cc: f64,
    pub cnf: f64,
    pub tnf: f64,
    pub tri: [f64; 3],
}

/// Selects one of the eight feature combinations and the histogram size.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FeatureConfig {
    /// Combination index, 1..=8:
    /// 1. `[tnf]`
    /// 2. `[od, cc, cnf, tnf]`
    /// 3. (2) + averages of od/cc/cnf/tnf over first known neighbors
    /// 4. `[tri0, tri1, tri2]`
    /// 5. `[od, cc, cnf, tnf, tri0, tri1, tri2]`
    /// 6. (5) + neighbor averages as in (3)
    /// 7. (5) + per-feature histograms of od/cc/cnf/tnf over first neighbors
    /// 8. (7) + the same histograms over second neighbors
    #[serde(default = "default_combination")]
    pub combination: u8,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_combination() -> u8 {
    7
}

fn default_bins() -> usize {
    5
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            combination: default_combination(),
            bins: default_bins(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.combination) {
            return Err(Error::InvalidParameter(format!(
                "feature combination must be 1..=8, got {}",
                self.combination
            )));
        }
        if self.bins == 0 {
            return Err(Error::InvalidParameter("bins must be >= 1".into()));
        }
        Ok(())
    }

    /// Vector length is a pure function of (combination, bins).
    pub fn vector_len(&self) -> usize {
        match self.combination {
            1 => 1,
            2 => 4,
            3 => 8,
            4 => 3,
            5 => 7,
            6 => 11,
            7 => 7 + 4 * self.bins,
            8 => 7 + 8 * self.bins,
            _ => 0,
        }
    }
}

/// Fixed-length feature vector; layout documented on [`FeatureConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Features of one observed node, read from the crawl state's incremental
/// counters in O(1).
pub fn node_features(state: &CrawlState, v: NodeId) -> Result<NodeFeatures> {
    let d = state.known_degree(v)?;
    if d == 0 {
        return Ok(NodeFeatures {
            od: 0.0,
            cc: 0.0,
            cnf: 0.0,
            tnf: 0.0,
            tri: [0.0; 3],
        });
    }
    let df = d as f64;
    let buckets = state.triangle_buckets(v);
    let t: u32 = buckets.iter().sum();
    let cc = if d < 2 {
        0.0
    } else {
        2.0 * t as f64 / (df * (df - 1.0))
    };
    let tri = if t == 0 {
        [0.0; 3]
    } else {
        [
            buckets[0] as f64 / t as f64,
            buckets[1] as f64 / t as f64,
            buckets[2] as f64 / t as f64,
        ]
    };
    Ok(NodeFeatures {
        od: 1.0 / df.sqrt(),
        cc,
        cnf: state.crawled_neighbor_count(v) as f64 / df,
        tnf: state.target_neighbor_count(v) as f64 / df,
        tri,
    })
}

/// Normalized histogram of values in [0, 1] with left-closed bins at `k/bins`
/// and 1.0 falling into the last bin. Sums to 1, or is all zero for empty
/// input.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; bins];
    for &x in values {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::ValueOutOfRange(x));
        }
        let idx = ((x * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    if values.is_empty() {
        return Ok(vec![0.0; bins]);
    }
    let total = values.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / total).collect())
}

/// Assembles the classical-predictor input for one observed node.
pub fn feature_vector(state: &CrawlState, v: NodeId, cfg: &FeatureConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    let f = node_features(state, v)?;
    let mut values = Vec::with_capacity(cfg.vector_len());
    match cfg.combination {
        1 => values.push(f.tnf),
        2 => values.extend([f.od, f.cc, f.cnf, f.tnf]),
        3 => {
            values.extend([f.od, f.cc, f.cnf, f.tnf]);
            values.extend(neighbor_averages(state, v)?);
        }
        4 => values.extend(f.tri),
        5 => {
            values.extend([f.od, f.cc, f.cnf, f.tnf]);
            values.extend(f.tri);
        }
        6 => {
            values.extend([f.od, f.cc, f.cnf, f.tnf]);
            values.extend(f.tri);
            values.extend(neighbor_averages(state, v)?);
        }
        7 | 8 => {
            values.extend([f.od, f.cc, f.cnf, f.tnf]);
            values.extend(f.tri);
            let first: Vec<NodeId> = state.known_neighbors(v).to_vec();
            extend_with_histograms(state, &first, cfg.bins, &mut values)?;
            if cfg.combination == 8 {
                let second: Vec<NodeId> = state
                    .known_ball(v, 2)
                    .into_iter()
                    .filter(|&(_, d)| d == 2)
                    .map(|(u, _)| u)
                    .collect();
                extend_with_histograms(state, &second, cfg.bins, &mut values)?;
            }
        }
        _ => unreachable!("validated above"),
    }
    debug_assert_eq!(values.len(), cfg.vector_len());
    debug_assert!(values.iter().all(|x| (0.0..=1.0).contains(x)));
    Ok(FeatureVector { values })
}

/// Mean od/cc/cnf/tnf over a node's first known neighbors; zeros when there
/// are none.
fn neighbor_averages(state: &CrawlState, v: NodeId) -> Result<[f64; 4]> {
    let nbrs = state.known_neighbors(v);
    if nbrs.is_empty() {
        return Ok([0.0; 4]);
    }
    let mut sums = [0.0; 4];
    for &u in nbrs {
        let f = node_features(state, u)?;
        sums[0] += f.od;
        sums[1] += f.cc;
        sums[2] += f.cnf;
        sums[3] += f.tnf;
    }
    let n = nbrs.len() as f64;
    Ok(sums.map(|s| s / n))
}

fn extend_with_histograms(
    state: &CrawlState,
    nodes: &[NodeId],
    bins: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let mut od = Vec::with_capacity(nodes.len());
    let mut cc = Vec::with_capacity(nodes.len());
    let mut cnf = Vec::with_capacity(nodes.len());
    let mut tnf = Vec::with_capacity(nodes.len());
    for &u in nodes {
        let f = node_features(state, u)?;
        od.push(f.od);
        cc.push(f.cc);
        cnf.push(f.cnf);
        tnf.push(f.tnf);
    }
    for series in [od, cc, cnf, tnf] {
        out.extend(histogram(&series, bins)?);
    }
    Ok(())
}
