//! Ground-truth graph storage: the hidden graph a crawler explores.
//!
//! A [`FullGraph`] is undirected, loop-free and deduplicated. Node ids are
//! dense `[0, n)` after construction; the original external labels are kept
//! in a side map so results can be reported in the caller's id space.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense internal node id.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl serde::Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u32(self.0)
    }
}

impl<'de> serde::Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        serde::Deserialize::deserialize(d).map(NodeId)
    }
}

/// The hidden ground-truth graph plus optional per-node integer attributes.
///
/// Queried by the crawler only through [`crate::crawl::CrawlState::crawl`];
/// everything else in the framework sees partial knowledge.
#[derive(Clone, Debug)]
pub struct FullGraph {
    adj: Vec<Vec<NodeId>>,
    edge_count: usize,
    /// Original external label of each node.
    external: Vec<u64>,
    /// external label -> internal id
    external_index: HashMap<u64, NodeId>,
    /// attribute name -> per-node optional value
    attributes: HashMap<String, Vec<Option<i64>>>,
}

impl FullGraph {
    /// Builds a graph from `(u, v)` pairs of external labels.
    ///
    /// Self-loops are dropped, duplicates and reversed duplicates collapse to
    /// one undirected edge, and nodes are reindexed densely in ascending
    /// order of external label.
    pub fn from_edges(edges: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let edges: Vec<(u64, u64)> = edges.into_iter().collect();
        let mut labels: Vec<u64> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let external_index: HashMap<u64, NodeId> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, NodeId(i as u32)))
            .collect();
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); labels.len()];
        for (u, v) in edges {
            if u == v {
                continue;
            }
            let (a, b) = (external_index[&u], external_index[&v]);
            adj[a.index()].push(b);
            adj[b.index()].push(a);
        }
        let mut edge_count = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        Ok(Self {
            adj,
            edge_count: edge_count / 2,
            external: labels,
            external_index,
            attributes: HashMap::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.adj.len() as u32).map(NodeId)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.adj.len()
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v.index()].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u.index()].binary_search(&v).is_ok()
    }

    /// Original label the node had in the input data.
    pub fn external_label(&self, v: NodeId) -> u64 {
        self.external[v.index()]
    }

    pub fn resolve_external(&self, label: u64) -> Option<NodeId> {
        self.external_index.get(&label).copied()
    }

    pub fn set_attribute(&mut self, v: NodeId, name: &str, value: i64) {
        let n = self.adj.len();
        self.attributes
            .entry(name.to_string())
            .or_insert_with(|| vec![None; n])[v.index()] = Some(value);
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attributes.contains_key(name)
    }

    pub fn attribute(&self, v: NodeId, name: &str) -> Option<i64> {
        self.attributes.get(name).and_then(|col| col[v.index()])
    }

    /// Restricts the graph to its largest connected component.
    ///
    /// Returns the reduced graph (ids reindexed, external labels and
    /// attributes carried over) together with a map from old id to new id.
    /// Ties between equal-sized components go to the one containing the
    /// smallest node id.
    pub fn giant_component(&self) -> (FullGraph, Vec<Option<NodeId>>) {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let c = sizes.len();
            let mut size = 0usize;
            comp[start] = c;
            stack.push(start);
            while let Some(u) = stack.pop() {
                size += 1;
                for &w in &self.adj[u] {
                    if comp[w.index()] == usize::MAX {
                        comp[w.index()] = c;
                        stack.push(w.index());
                    }
                }
            }
            sizes.push(size);
        }
        let best = (0..sizes.len())
            .max_by_key(|&c| (sizes[c], std::cmp::Reverse(c)))
            .expect("graph is non-empty");

        let mut map = vec![None; n];
        let mut kept = Vec::new();
        for old in 0..n {
            if comp[old] == best {
                map[old] = Some(NodeId(kept.len() as u32));
                kept.push(old);
            }
        }
        let adj = kept
            .iter()
            .map(|&old| {
                self.adj[old]
                    .iter()
                    .filter_map(|w| map[w.index()])
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        let edge_count = adj.iter().map(Vec::len).sum::<usize>() / 2;
        let external: Vec<u64> = kept.iter().map(|&old| self.external[old]).collect();
        let external_index = external
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, NodeId(i as u32)))
            .collect();
        let attributes = self
            .attributes
            .iter()
            .map(|(name, col)| {
                (
                    name.clone(),
                    kept.iter().map(|&old| col[old]).collect::<Vec<_>>(),
                )
            })
            .collect();
        (
            FullGraph {
                adj,
                edge_count,
                external,
                external_index,
                attributes,
            },
            map,
        )
    }

    /// Checks structural invariants: symmetry, sortedness, no loops, no dups.
    pub fn check_invariants(&self) -> Result<()> {
        for (u, list) in self.adj.iter().enumerate() {
            let u = NodeId(u as u32);
            for pair in list.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency of {u} not sorted/deduplicated"
                    )));
                }
            }
            for &w in list {
                if w == u {
                    return Err(Error::InvalidParameter(format!("self-loop at {u}")));
                }
                if !self.has_edge(w, u) {
                    return Err(Error::InvalidParameter(format!(
                        "edge {u}-{w} not symmetric"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_deduplicated_undirected_graph() {
        let g = FullGraph::from_edges([(0, 1), (1, 0), (1, 2), (2, 2)]).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(NodeId(1)), &[NodeId(0), NodeId(2)]);
        assert!(g.has_edge(NodeId(0), NodeId(1)));
        assert!(!g.has_edge(NodeId(0), NodeId(2)));
        g.check_invariants().unwrap();
    }

    #[test]
    fn external_labels_round_trip() {
        let g = FullGraph::from_edges([(10, 30), (30, 20)]).unwrap();
        assert_eq!(g.external_label(NodeId(0)), 10);
        assert_eq!(g.resolve_external(30), Some(NodeId(2)));
        assert_eq!(g.resolve_external(99), None);
    }

    #[test]
    fn empty_edge_list_is_an_error() {
        assert!(matches!(
            FullGraph::from_edges(std::iter::empty()),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn giant_component_keeps_largest() {
        // components {0,1} and {2,3,4}
        let g = FullGraph::from_edges([(0, 1), (2, 3), (3, 4)]).unwrap();
        let (gc, map) = g.giant_component();
        assert_eq!(gc.node_count(), 3);
        assert_eq!(gc.edge_count(), 2);
        assert_eq!(map[0], None);
        assert_eq!(map[2], Some(NodeId(0)));
        assert_eq!(gc.external_label(NodeId(0)), 2);
    }

    #[test]
    fn giant_component_carries_attributes() {
        let mut g = FullGraph::from_edges([(0, 1), (2, 3), (3, 4)]).unwrap();
        g.set_attribute(NodeId(3), "sex", 1);
        let (gc, _) = g.giant_component();
        assert_eq!(gc.attribute(NodeId(1), "sex"), Some(1));
        assert_eq!(gc.attribute(NodeId(0), "sex"), None);
    }
}
