//! Ego-graph extraction and from-scratch graph neural networks.
//!
//! A candidate's ego graph is its 2-hop neighborhood over known edges.
//! Every node carries a 5-dim input: od, cc, cnf plus a 2-dim label
//! encoding — (1,0) crawled target, (0,1) crawled non-target, (0,0) for
//! uncrawled nodes and always for the candidate itself.
//!
//! Three architectures share fixed (5, 5, 2) layer sizes: GCN with
//! symmetric-normalized self-loop aggregation, GraphSAGE with the mean
//! ("gcn") aggregator, and GAT with multi-head attention. All arithmetic is
//! f64 and every gradient is analytic (checked against finite differences).

mod conv;
mod gat;
mod model;
mod train;

pub use model::{gnn_score, GnnModel};
pub use train::{gnn_train, gnn_train_with_report, TrainConfig, TrainReport};

use crate::crawl::CrawlState;
use crate::error::Result;
use crate::features::node_features;
use crate::graph::NodeId;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const INPUT_DIM: usize = 5;
pub const HIDDEN_DIM: usize = 5;
pub const OUTPUT_DIM: usize = 2;
pub const DEFAULT_GAT_HEADS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnnKind {
    Gcn,
    Sage,
    Gat,
}

impl std::fmt::Display for GnnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GnnKind::Gcn => write!(f, "gcn"),
            GnnKind::Sage => write!(f, "sage"),
            GnnKind::Gat => write!(f, "gat"),
        }
    }
}

/// 2-hop known neighborhood of one candidate node, with per-node GNN inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct EgoGraph {
    /// Local index -> global id; index 0 is the candidate.
    pub nodes: Vec<NodeId>,
    /// Undirected local edges, `a < b`, no duplicates.
    pub edges: Vec<(usize, usize)>,
    /// Per-node sorted neighbor lists (local indices, no self).
    pub nbrs: Vec<Vec<usize>>,
    /// Per-node 5-dim inputs `[od, cc, cnf, t0, t1]`.
    pub x: Vec<[f64; INPUT_DIM]>,
    /// Local index of the node being scored (always 0).
    pub candidate: usize,
    /// Oracle truth, present only on training samples.
    pub label: Option<bool>,
}

impl EgoGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn with_label(mut self, label: bool) -> Self {
        self.label = Some(label);
        self
    }
}

/// Extracts the ego graph of an observed node from the current knowledge.
pub fn extract_ego(state: &CrawlState, v: NodeId) -> Result<EgoGraph> {
    let ball = state.known_ball(v, 2);
    let mut local: HashMap<NodeId, usize> = HashMap::with_capacity(ball.len());
    let mut nodes = Vec::with_capacity(ball.len());
    for &(u, _) in &ball {
        local.insert(u, nodes.len());
        nodes.push(u);
    }
    let mut edges = Vec::new();
    let mut nbrs = vec![Vec::new(); nodes.len()];
    for (i, &u) in nodes.iter().enumerate() {
        for &w in state.known_neighbors(u) {
            if let Some(&j) = local.get(&w) {
                if i < j {
                    edges.push((i, j));
                    nbrs[i].push(j);
                    nbrs[j].push(i);
                }
            }
        }
    }
    for list in &mut nbrs {
        list.sort_unstable();
    }
    let mut x = Vec::with_capacity(nodes.len());
    for &u in &nodes {
        let f = node_features(state, u)?;
        let (t0, t1) = if u == v {
            (0.0, 0.0)
        } else {
            match state.label(u) {
                Some(true) => (1.0, 0.0),
                Some(false) => (0.0, 1.0),
                None => (0.0, 0.0),
            }
        };
        x.push([f.od, f.cc, f.cnf, t0, t1]);
    }
    Ok(EgoGraph {
        nodes,
        edges,
        nbrs,
        x,
        candidate: 0,
        label: None,
    })
}

#[inline]
pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub(crate) const LEAKY_SLOPE: f64 = 0.2;

#[inline]
pub(crate) fn leaky_relu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[inline]
pub(crate) fn leaky_relu_grad(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Row-major dense matrix; small and allocation-cheap, sized per ego graph.
#[derive(Clone, Debug)]
pub(crate) struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            a: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.a[i * self.cols..(i + 1) * self.cols]
    }
}

/// z[i] = W·m[i] + b for row-major W (out × in).
pub(crate) fn linear(m: &Dense, w: &[f64], b: &[f64], out_dim: usize) -> Dense {
    let mut z = Dense::zeros(m.rows, out_dim);
    for (mi, zi) in m.a.chunks_exact(m.cols).zip(z.a.chunks_exact_mut(out_dim)) {
        for ((zo, wo), bo) in zi.iter_mut().zip(w.chunks_exact(m.cols)).zip(b) {
            *zo = wo.iter().zip(mi).fold(*bo, |acc, (w, v)| acc + w * v);
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FullGraph;
    use crate::oracle::TargetSpec;

    fn crawl(g: &FullGraph, targets: &[u32], order: &[u32]) -> CrawlState {
        let oracle = TargetSpec::Members(targets.iter().map(|&v| NodeId(v)).collect())
            .resolve(g)
            .unwrap();
        let mut st = CrawlState::init_crawl(g, NodeId(order[0])).unwrap();
        for &v in order {
            st.crawl(g, &oracle, NodeId(v)).unwrap();
        }
        st
    }

    #[test]
    fn isolated_seed_ego_is_single_zero_node() {
        let g = FullGraph::from_edges([(0, 1)]).unwrap();
        let st = CrawlState::init_crawl(&g, NodeId(0)).unwrap();
        let ego = extract_ego(&st, NodeId(0)).unwrap();
        assert_eq!(ego.len(), 1);
        assert!(ego.edges.is_empty());
        assert_eq!(ego.x[0], [0.0; 5]);
        assert_eq!(ego.candidate, 0);
    }

    #[test]
    fn path_candidate_center_sees_two_hops() {
        let g = FullGraph::from_edges([(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let st = crawl(&g, &[0, 2], &[0, 1, 2, 3, 4]);
        let ego = extract_ego(&st, NodeId(2)).unwrap();
        assert_eq!(ego.len(), 5);
        assert_eq!(ego.edges.len(), 4);
    }

    #[test]
    fn label_encodings_follow_the_convention() {
        // candidate 2, crawled target 0, crawled non-target 1
        let g = FullGraph::from_edges([(0, 1), (0, 2), (1, 2)]).unwrap();
        let st = crawl(&g, &[0], &[0, 1]);
        let ego = extract_ego(&st, NodeId(2)).unwrap();
        assert_eq!(ego.nodes[0], NodeId(2));
        let enc: Vec<(f64, f64)> = ego.x.iter().map(|x| (x[3], x[4])).collect();
        assert_eq!(enc[0], (0.0, 0.0)); // candidate
        let i0 = ego.nodes.iter().position(|&u| u == NodeId(0)).unwrap();
        let i1 = ego.nodes.iter().position(|&u| u == NodeId(1)).unwrap();
        assert_eq!(enc[i0], (1.0, 0.0));
        assert_eq!(enc[i1], (0.0, 1.0));
        // the candidate keeps (0,0) even when itself crawled
        let st2 = crawl(&g, &[0], &[0, 1, 2]);
        let ego2 = extract_ego(&st2, NodeId(2)).unwrap();
        assert_eq!((ego2.x[0][3], ego2.x[0][4]), (0.0, 0.0));
    }

    #[test]
    fn unobserved_candidate_is_an_error() {
        let g = FullGraph::from_edges([(0, 1), (1, 2)]).unwrap();
        let st = CrawlState::init_crawl(&g, NodeId(0)).unwrap();
        assert!(extract_ego(&st, NodeId(2)).is_err());
    }
}
