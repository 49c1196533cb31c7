//! Target sets and the membership oracle.
//!
//! The oracle is the only source of node labels. During a crawl it is
//! consulted exactly once per query, inside [`crate::crawl::CrawlState::crawl`];
//! the query counter lets tests audit that information model.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FullGraph, NodeId};

/// How a target set is defined over a graph.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// All nodes whose attribute `name` equals `value`.
    AttributeEquals { name: String, value: i64 },
    /// An explicit set of internal node ids.
    Members(BTreeSet<NodeId>),
    /// Nodes of one planted community of a synthetic graph (the generators
    /// store the block index in the `community` attribute).
    CommunityId(i64),
}

impl TargetSpec {
    /// Resolves the spec against a graph into a concrete oracle.
    pub fn resolve(&self, full: &FullGraph) -> Result<Oracle> {
        let n = full.node_count();
        let mut bits = vec![false; n];
        match self {
            TargetSpec::AttributeEquals { name, value } => {
                if !full.has_attribute(name) {
                    return Err(Error::UnknownAttribute(name.clone()));
                }
                for v in full.nodes() {
                    bits[v.index()] = full.attribute(v, name) == Some(*value);
                }
            }
            TargetSpec::Members(set) => {
                for &v in set {
                    if v.index() >= n {
                        return Err(Error::NodeOutOfRange(v.0 as u64));
                    }
                    bits[v.index()] = true;
                }
            }
            TargetSpec::CommunityId(block) => {
                if !full.has_attribute("community") {
                    return Err(Error::UnknownAttribute("community".into()));
                }
                for v in full.nodes() {
                    bits[v.index()] = full.attribute(v, "community") == Some(*block);
                }
            }
        }
        let count = bits.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::EmptyTargetSet);
        }
        Ok(Oracle {
            bits,
            count,
            queries: AtomicU64::new(0),
        })
    }
}

/// Reads a membership-list file: one external node label per line, `#`
/// starts a comment, blank lines are ignored. Labels are mapped to internal
/// ids through the graph's external-id table.
pub fn load_membership_list(path: &Path, full: &FullGraph) -> Result<TargetSpec> {
    let text = std::fs::read_to_string(path)?;
    let mut members = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let label: u64 = line.parse().map_err(|_| Error::MalformedLine {
            path: path.display().to_string(),
            line: lineno + 1,
            message: format!("expected a node label, got {line:?}"),
        })?;
        match full.resolve_external(label) {
            Some(v) => {
                members.insert(v);
            }
            None => log::warn!("membership list {}: unknown node {label}, skipped", path.display()),
        }
    }
    Ok(TargetSpec::Members(members))
}

/// A resolved target set: a pure membership function over node ids.
#[derive(Debug)]
pub struct Oracle {
    bits: Vec<bool>,
    count: usize,
    queries: AtomicU64,
}

impl Oracle {
    /// Answers a membership query, counting it.
    pub fn is_target(&self, v: NodeId) -> Result<bool> {
        if v.index() >= self.bits.len() {
            return Err(Error::NodeOutOfRange(v.0 as u64));
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(self.bits[v.index()])
    }

    /// Non-counting membership check for run setup and validation (seed
    /// selection, precondition checks). Crawl-time queries must go through
    /// [`Oracle::is_target`].
    pub fn peek_is_target(&self, v: NodeId) -> bool {
        v.index() < self.bits.len() && self.bits[v.index()]
    }

    pub fn target_count(&self) -> usize {
        self.count
    }

    /// All target ids in ascending order; setup-only, does not count.
    pub fn target_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| NodeId(i as u32))
    }

    /// Number of counted queries so far.
    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}
