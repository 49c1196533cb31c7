//! The crawler's entire knowledge of the graph: crawled nodes, observed
//! frontier, known edges and labels, plus incrementally maintained per-node
//! statistics (degree, crawled/target neighbor counts, triangle buckets)
//! that back the feature module.
//!
//! A known edge always has at least one crawled endpoint: crawling a node
//! reveals its full adjacency, nothing else. Edges between two uncrawled
//! observed nodes stay unknown until one endpoint is crawled.

use std::collections::BTreeSet;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{FullGraph, NodeId};
use crate::oracle::Oracle;

#[derive(Clone, Debug, PartialEq)]
pub struct CrawlState {
    n: usize,
    seed: NodeId,
    crawled_order: Vec<NodeId>,
    crawled: Vec<bool>,
    observed: Vec<bool>,
    frontier: BTreeSet<NodeId>,
    known_adj: Vec<Vec<NodeId>>,
    labels: Vec<Option<bool>>,
    queries_used: usize,
    // Incremental statistics over the known graph.
    crawled_nbrs: Vec<u32>,
    target_nbrs: Vec<u32>,
    /// Triangles containing v, bucketed by how many of the other two
    /// vertices are crawled.
    tri: Vec<[u32; 3]>,
}

impl CrawlState {
    /// Starts a crawl: the seed is observed but not yet crawled.
    pub fn init_crawl(full: &FullGraph, seed: NodeId) -> Result<Self> {
        if !full.contains(seed) {
            return Err(Error::SeedNotInGraph);
        }
        Ok(Self::with_size(full.node_count(), seed))
    }

    /// Bare state over an id space of size `n`; used for snapshot replay.
    pub(crate) fn with_size(n: usize, seed: NodeId) -> Self {
        let mut observed = vec![false; n];
        observed[seed.index()] = true;
        let mut frontier = BTreeSet::new();
        frontier.insert(seed);
        Self {
            n,
            seed,
            crawled_order: Vec::new(),
            crawled: vec![false; n],
            observed,
            frontier,
            known_adj: vec![Vec::new(); n],
            labels: vec![None; n],
            queries_used: 0,
            crawled_nbrs: vec![0; n],
            target_nbrs: vec![0; n],
            tri: vec![[0; 3]; n],
        }
    }

    /// Crawls `v`: spends one query, reveals its adjacency and its label.
    pub fn crawl(&mut self, full: &FullGraph, oracle: &Oracle, v: NodeId) -> Result<bool> {
        if !full.contains(v) || !self.observed[v.index()] {
            return Err(Error::NodeNotVisible(v));
        }
        if self.crawled[v.index()] {
            return Err(Error::AlreadyCrawled(v));
        }
        let label = oracle.is_target(v)?;
        self.advance(v, full.neighbors(v), label);
        Ok(label)
    }

    /// Core knowledge update shared by live crawling and snapshot replay.
    ///
    /// `neighbors` must be the complete sorted adjacency of `v` in the
    /// underlying graph (or in the replayed knowledge), `label` its oracle
    /// answer. Preconditions (`v` observed, not crawled) are the caller's.
    pub(crate) fn advance(&mut self, v: NodeId, neighbors: &[NodeId], label: bool) {
        debug_assert!(self.observed[v.index()] && !self.crawled[v.index()]);
        let vi = v.index();

        // Existing triangles containing v: v flips to crawled, so at each of
        // the other two vertices the triangle moves up one bucket.
        let prev: Vec<NodeId> = self.known_adj[vi].clone();
        for (i, &a) in prev.iter().enumerate() {
            for &b in &prev[i + 1..] {
                if self.has_known_edge(a, b) {
                    let ca = usize::from(self.crawled[a.index()]);
                    let cb = usize::from(self.crawled[b.index()]);
                    // At a the others are (v, b); at b they are (v, a).
                    self.tri[a.index()][cb] -= 1;
                    self.tri[a.index()][cb + 1] += 1;
                    self.tri[b.index()][ca] -= 1;
                    self.tri[b.index()][ca + 1] += 1;
                }
            }
        }

        self.crawled[vi] = true;
        self.labels[vi] = Some(label);
        self.crawled_order.push(v);
        self.queries_used += 1;
        self.frontier.remove(&v);

        // Previously known neighbors gain a crawled (and maybe target) neighbor.
        for &w in &prev {
            self.crawled_nbrs[w.index()] += 1;
            if label {
                self.target_nbrs[w.index()] += 1;
            }
        }

        // Reveal v's adjacency. An edge (v, u) is already known exactly when
        // u is crawled (u's crawl revealed it), so only uncrawled endpoints
        // produce new edges.
        for &u in neighbors {
            let ui = u.index();
            if !self.observed[ui] {
                self.observed[ui] = true;
                self.frontier.insert(u);
            }
            if self.crawled[ui] {
                continue;
            }
            self.add_known_edge(v, u);
            self.crawled_nbrs[ui] += 1;
            if label {
                self.target_nbrs[ui] += 1;
            }
        }
    }

    /// Inserts edge (v, u) into the known graph and updates triangle buckets
    /// for every triangle the edge closes. `v` is crawled, `u` is not.
    fn add_known_edge(&mut self, v: NodeId, u: NodeId) {
        // Triangles closed by (v, u): common known neighbors of v and u.
        let (small, large) = if self.known_adj[v.index()].len() <= self.known_adj[u.index()].len() {
            (v, u)
        } else {
            (u, v)
        };
        let mut common = Vec::new();
        for &c in &self.known_adj[small.index()] {
            if self.known_adj[large.index()].binary_search(&c).is_ok() {
                common.push(c);
            }
        }
        for c in common {
            let cu = usize::from(self.crawled[u.index()]); // always 0 here
            let cc = usize::from(self.crawled[c.index()]);
            self.tri[v.index()][cu + cc] += 1; // others: (u, c)
            self.tri[u.index()][1 + cc] += 1; // others: (v, c), v crawled
            self.tri[c.index()][1 + cu] += 1; // others: (v, u)
        }
        let list = &mut self.known_adj[v.index()];
        let pos = list.binary_search(&u).unwrap_err();
        list.insert(pos, u);
        let list = &mut self.known_adj[u.index()];
        let pos = list.binary_search(&v).unwrap_err();
        list.insert(pos, v);
    }

    pub fn has_known_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.known_adj[u.index()].binary_search(&v).is_ok()
    }

    /// Observed nodes not yet crawled, in ascending id order.
    pub fn frontier(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.frontier.iter().copied()
    }

    pub fn frontier_len(&self) -> usize {
        self.frontier.len()
    }

    pub fn known_degree(&self, v: NodeId) -> Result<usize> {
        if !self.is_observed(v) {
            return Err(Error::NodeNotVisible(v));
        }
        Ok(self.known_adj[v.index()].len())
    }

    /// Sorted known neighbors of an observed node.
    pub fn known_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.known_adj[v.index()]
    }

    pub fn is_observed(&self, v: NodeId) -> bool {
        v.index() < self.n && self.observed[v.index()]
    }

    pub fn is_crawled(&self, v: NodeId) -> bool {
        v.index() < self.n && self.crawled[v.index()]
    }

    /// Oracle label, known only for crawled nodes.
    pub fn label(&self, v: NodeId) -> Option<bool> {
        self.labels[v.index()]
    }

    pub fn crawled_order(&self) -> &[NodeId] {
        &self.crawled_order
    }

    pub fn crawled_count(&self) -> usize {
        self.crawled_order.len()
    }

    pub fn seed(&self) -> NodeId {
        self.seed
    }

    pub fn queries_used(&self) -> usize {
        self.queries_used
    }

    pub fn node_space(&self) -> usize {
        self.n
    }

    pub fn crawled_neighbor_count(&self, v: NodeId) -> usize {
        self.crawled_nbrs[v.index()] as usize
    }

    pub fn target_neighbor_count(&self, v: NodeId) -> usize {
        self.target_nbrs[v.index()] as usize
    }

    /// Triangles containing `v` in the known graph, bucketed by the number
    /// of crawled vertices among the other two.
    pub fn triangle_buckets(&self, v: NodeId) -> [u32; 3] {
        self.tri[v.index()]
    }

    /// BFS over known edges up to `max_depth`, returning `(node, depth)` in
    /// visit order starting from `v` itself. Deterministic: neighbors are
    /// expanded in sorted order.
    pub fn known_ball(&self, v: NodeId, max_depth: usize) -> Vec<(NodeId, usize)> {
        let mut out = vec![(v, 0)];
        let mut seen: HashMap<NodeId, ()> = HashMap::new();
        seen.insert(v, ());
        let mut head = 0;
        while head < out.len() {
            let (u, d) = out[head];
            head += 1;
            if d == max_depth {
                continue;
            }
            for &w in &self.known_adj[u.index()] {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(w) {
                    e.insert(());
                    out.push((w, d + 1));
                }
            }
        }
        out
    }

    /// Full recomputation of every invariant and cached statistic; meant for
    /// tests and debug checkpoints, not hot paths.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if self.queries_used != self.crawled_order.len() {
            return fail("queries_used != |crawled|".into());
        }
        for &v in &self.crawled_order {
            if !self.observed[v.index()] || self.labels[v.index()].is_none() {
                return fail(format!("crawled node {v} not observed/labeled"));
            }
        }
        for i in 0..self.n {
            let v = NodeId(i as u32);
            if self.labels[i].is_some() != self.crawled[i] {
                return fail(format!("label defined off the crawled set at {v}"));
            }
            if self.frontier.contains(&v) != (self.observed[i] && !self.crawled[i]) {
                return fail(format!("frontier mismatch at {v}"));
            }
            for &w in &self.known_adj[i] {
                if !self.crawled[i] && !self.crawled[w.index()] {
                    return fail(format!("known edge {v}-{w} has no crawled endpoint"));
                }
                if !self.has_known_edge(w, v) {
                    return fail(format!("known edge {v}-{w} not symmetric"));
                }
            }
            // every observed non-crawled node is the seed or adjacent to a crawled node
            if self.observed[i] && !self.crawled[i] && v != self.seed {
                let ok = self.known_adj[i].iter().any(|w| self.crawled[w.index()]);
                if !ok {
                    return fail(format!("observed node {v} has no crawled neighbor"));
                }
            }
            let cn = self.known_adj[i]
                .iter()
                .filter(|w| self.crawled[w.index()])
                .count();
            if cn != self.crawled_nbrs[i] as usize {
                return fail(format!("crawled-neighbor count stale at {v}"));
            }
            let tn = self.known_adj[i]
                .iter()
                .filter(|w| self.labels[w.index()] == Some(true))
                .count();
            if tn != self.target_nbrs[i] as usize {
                return fail(format!("target-neighbor count stale at {v}"));
            }
        }
        // triangle buckets against brute-force enumeration
        let brute = self.brute_force_triangles();
        if brute != self.tri {
            return fail("triangle buckets stale".into());
        }
        Ok(())
    }

    /// Independent triangle enumeration used by invariant checks and tests.
    pub fn brute_force_triangles(&self) -> Vec<[u32; 3]> {
        let mut tri = vec![[0u32; 3]; self.n];
        for a in 0..self.n {
            for &b in &self.known_adj[a] {
                if b.index() <= a {
                    continue;
                }
                for &c in &self.known_adj[b.index()] {
                    if c.index() <= b.index() || !self.has_known_edge(NodeId(a as u32), c) {
                        continue;
                    }
                    let ca = u32::from(self.crawled[a]);
                    let cb = u32::from(self.crawled[b.index()]);
                    let cc = u32::from(self.crawled[c.index()]);
                    tri[a][(cb + cc) as usize] += 1;
                    tri[b.index()][(ca + cc) as usize] += 1;
                    tri[c.index()][(ca + cb) as usize] += 1;
                }
            }
        }
        tri
    }
}
