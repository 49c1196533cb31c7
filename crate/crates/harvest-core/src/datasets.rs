//! Graph ingestion and synthetic generators for the three target-set
//! topologies: one dense subgraph, several dense subgraphs, and targets
//! scattered uniformly over the graph.
//!
//! Every source ends with giant-component extraction, mirroring the
//! preprocessing applied to the crawled social-network samples this
//! framework models. Generators are deterministic given their seed and
//! retry with a derived sub-seed (up to 5 times) if the target set dies
//! with the discarded components.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FullGraph;
use crate::oracle::TargetSpec;
use crate::rng::derive_seed;

/// Where an experiment's graph comes from.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    EdgeList {
        path: PathBuf,
        #[serde(default)]
        attributes: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticSpec {
    /// One planted dense block; targets are its members.
    Type1 {
        n: usize,
        community_size: usize,
        p_in: f64,
        p_background: f64,
        seed: u64,
    },
    /// Several disjoint planted blocks; targets are their union.
    Type2 {
        n: usize,
        sizes: Vec<usize>,
        p_in: f64,
        p_background: f64,
        seed: u64,
    },
    /// Preferential attachment with independent scattered targets.
    Type3 {
        n: usize,
        m: usize,
        target_prob: f64,
        seed: u64,
    },
}

impl GraphSource {
    /// Loads or generates the graph. Synthetic sources also produce their
    /// target spec; edge-list sources leave targets to the caller.
    pub fn resolve(&self) -> Result<(FullGraph, Option<TargetSpec>)> {
        match self {
            GraphSource::EdgeList { path, attributes } => {
                let mut g = load_edge_list(path)?;
                if let Some(attrs) = attributes {
                    load_attributes(attrs, &mut g)?;
                }
                Ok((g, None))
            }
            GraphSource::Synthetic(spec) => {
                let (g, t) = spec.generate()?;
                Ok((g, Some(t)))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSource::EdgeList { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "edge_list".into()),
            GraphSource::Synthetic(SyntheticSpec::Type1 { n, seed, .. }) => {
                format!("type1_n{n}_s{seed}")
            }
            GraphSource::Synthetic(SyntheticSpec::Type2 { n, seed, .. }) => {
                format!("type2_n{n}_s{seed}")
            }
            GraphSource::Synthetic(SyntheticSpec::Type3 { n, seed, .. }) => {
                format!("type3_n{n}_s{seed}")
            }
        }
    }
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<(FullGraph, TargetSpec)> {
        match *self {
            SyntheticSpec::Type1 {
                n,
                community_size,
                p_in,
                p_background,
                seed,
            } => generate_type1(n, community_size, p_in, p_background, seed),
            SyntheticSpec::Type2 {
                n,
                ref sizes,
                p_in,
                p_background,
                seed,
            } => generate_type2(n, sizes, p_in, p_background, seed),
            SyntheticSpec::Type3 {
                n,
                m,
                target_prob,
                seed,
            } => generate_type3(n, m, target_prob, seed),
        }
    }
}

/// Reads a whitespace-separated edge list of external ids. `#` starts a
/// comment, blank lines are skipped. The result is symmetrized,
/// deduplicated, loop-free and restricted to the giant component.
pub fn load_edge_list(path: &Path) -> Result<FullGraph> {
    let text = std::fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::MalformedLine {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected \"u v\", got {line:?}"),
                })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::MalformedLine {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected \"u v\", got {line:?}"),
            });
        }
        edges.push((u, v));
    }
    let g = FullGraph::from_edges(edges)?;
    let (giant, _) = g.giant_component();
    Ok(giant)
}

/// Reads a `node,<attr>,...` CSV of integer attributes onto graph nodes.
/// Empty cells mean "missing"; rows for unknown nodes are skipped with a
/// warning. Returns the number of rows applied.
pub fn load_attributes(path: &Path, graph: &mut FullGraph) -> Result<usize> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"node") {
        return Err(Error::MalformedLine {
            path: path.display().to_string(),
            line: 1,
            message: "header must start with \"node\"".into(),
        });
    }
    let attrs: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
    let mut applied = 0;
    for (lineno, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
        let bad = |message: String| Error::MalformedLine {
            path: path.display().to_string(),
            line: lineno + 1,
            message,
        };
        if cells.len() != attrs.len() + 1 {
            return Err(bad(format!(
                "expected {} cells, got {}",
                attrs.len() + 1,
                cells.len()
            )));
        }
        let label: u64 = cells[0]
            .parse()
            .map_err(|_| bad(format!("bad node id {:?}", cells[0])))?;
        let Some(node) = graph.resolve_external(label) else {
            log::warn!(
                "{}:{}: unknown node {label}, row skipped",
                path.display(),
                lineno + 1
            );
            continue;
        };
        for (name, cell) in attrs.iter().zip(&cells[1..]) {
            if cell.is_empty() {
                continue;
            }
            let value: i64 = cell
                .parse()
                .map_err(|_| bad(format!("non-integer value {cell:?} for {name}")))?;
            graph.set_attribute(node, name, value);
        }
        applied += 1;
    }
    Ok(applied)
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be in (0, 1], got {p}"
        )));
    }
    Ok(())
}

const GENERATION_RETRIES: u64 = 5;

/// Runs a generator, retrying with derived sub-seeds until the target spec
/// survives giant-component extraction.
fn generate_with_retries(
    seed: u64,
    mut build: impl FnMut(u64) -> Result<(FullGraph, TargetSpec)>,
) -> Result<(FullGraph, TargetSpec)> {
    let mut last_err = None;
    for attempt in 0..GENERATION_RETRIES {
        let sub_seed = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, &[attempt])
        };
        let (graph, spec) = build(sub_seed)?;
        match spec.resolve(&graph) {
            Ok(_) => return Ok((graph, spec)),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::EmptyTargetSet))
}

/// Planted-partition edges: pairs inside one block connect with `p_in`,
/// every other pair with `p_background`. `block_of` maps a node to its
/// block, `usize::MAX` meaning background.
fn planted_edges(
    n: usize,
    block_of: &[usize],
    p_in: f64,
    p_background: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(u64, u64)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let same_block = block_of[i] != usize::MAX && block_of[i] == block_of[j];
            let p = if same_block { p_in } else { p_background };
            if rng.random::<f64>() < p {
                edges.push((i as u64, j as u64));
            }
        }
    }
    edges
}

/// One dense planted block over an Erdős–Rényi background; targets are the
/// block members (community id 0).
pub fn generate_type1(
    n: usize,
    community_size: usize,
    p_in: f64,
    p_background: f64,
    seed: u64,
) -> Result<(FullGraph, TargetSpec)> {
    if community_size == 0 || community_size >= n {
        return Err(Error::InvalidParameter(
            "community_size must be in [1, n)".into(),
        ));
    }
    check_prob("p_in", p_in)?;
    check_prob("p_background", p_background)?;
    if p_in <= p_background {
        return Err(Error::InvalidParameter(
            "p_in must exceed p_background".into(),
        ));
    }
    generate_with_retries(seed, |sub_seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let mut block_of = vec![usize::MAX; n];
        block_of[..community_size].fill(0);
        let edges = planted_edges(n, &block_of, p_in, p_background, &mut rng);
        let mut g = FullGraph::from_edges(edges)?;
        for label in 0..community_size as u64 {
            if let Some(v) = g.resolve_external(label) {
                g.set_attribute(v, "community", 0);
            }
        }
        let (giant, _) = g.giant_component();
        Ok((giant, TargetSpec::CommunityId(0)))
    })
}

/// Several disjoint planted blocks; targets are the union of the blocks.
pub fn generate_type2(
    n: usize,
    sizes: &[usize],
    p_in: f64,
    p_background: f64,
    seed: u64,
) -> Result<(FullGraph, TargetSpec)> {
    let total: usize = sizes.iter().sum();
    if sizes.is_empty() || sizes.iter().any(|&s| s == 0) || total >= n {
        return Err(Error::InvalidParameter(
            "block sizes must be positive with total < n".into(),
        ));
    }
    check_prob("p_in", p_in)?;
    check_prob("p_background", p_background)?;
    if p_in <= p_background {
        return Err(Error::InvalidParameter(
            "p_in must exceed p_background".into(),
        ));
    }
    generate_with_retries(seed, |sub_seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let mut block_of = vec![usize::MAX; n];
        let mut start = 0;
        for (b, &s) in sizes.iter().enumerate() {
            block_of[start..start + s].fill(b);
            start += s;
        }
        let edges = planted_edges(n, &block_of, p_in, p_background, &mut rng);
        let mut g = FullGraph::from_edges(edges)?;
        for (label, &b) in block_of.iter().enumerate() {
            if b == usize::MAX {
                continue;
            }
            if let Some(v) = g.resolve_external(label as u64) {
                g.set_attribute(v, "community", b as i64);
                g.set_attribute(v, "target", 1);
            }
        }
        let (giant, _) = g.giant_component();
        Ok((
            giant,
            TargetSpec::AttributeEquals {
                name: "target".into(),
                value: 1,
            },
        ))
    })
}

/// Preferential attachment: a complete seed graph on `m + 1` nodes, then
/// every new node attaches to `m` distinct existing nodes with probability
/// proportional to degree. Each node is independently a target with
/// `target_prob`.
pub fn generate_type3(
    n: usize,
    m: usize,
    target_prob: f64,
    seed: u64,
) -> Result<(FullGraph, TargetSpec)> {
    if m == 0 || m + 1 > n {
        return Err(Error::InvalidParameter("need 1 <= m and m + 1 <= n".into()));
    }
    if !(target_prob > 0.0 && target_prob < 1.0) {
        return Err(Error::InvalidParameter(
            "target_prob must be in (0, 1)".into(),
        ));
    }
    generate_with_retries(seed, |sub_seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let mut edges: Vec<(u64, u64)> = Vec::with_capacity(m * n);
        // one endpoint entry per degree unit
        let mut endpoints: Vec<u64> = Vec::with_capacity(2 * m * n);
        for i in 0..=m as u64 {
            for j in (i + 1)..=m as u64 {
                edges.push((i, j));
                endpoints.push(i);
                endpoints.push(j);
            }
        }
        let mut chosen: Vec<u64> = Vec::with_capacity(m);
        for v in (m + 1) as u64..n as u64 {
            chosen.clear();
            while chosen.len() < m {
                let pick = endpoints[rng.random_range(0..endpoints.len())];
                if !chosen.contains(&pick) {
                    chosen.push(pick);
                }
            }
            for &u in &chosen {
                edges.push((v, u));
                endpoints.push(v);
                endpoints.push(u);
            }
        }
        let mut g = FullGraph::from_edges(edges)?;
        for label in 0..n as u64 {
            if let Some(node) = g.resolve_external(label) {
                if rng.random::<f64>() < target_prob {
                    g.set_attribute(node, "target", 1);
                }
            }
        }
        let (giant, _) = g.giant_component();
        Ok((
            giant,
            TargetSpec::AttributeEquals {
                name: "target".into(),
                value: 1,
            },
        ))
    })
}

/// Writes `u v` lines in external labels, edges sorted, for `generate`
/// output and test fixtures.
pub fn write_edge_list(graph: &FullGraph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in graph.nodes() {
        for &u in graph.neighbors(v) {
            if v < u {
                out.push_str(&format!(
                    "{} {}\n",
                    graph.external_label(v),
                    graph.external_label(u)
                ));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes every node attribute as a `node,<attr>,...` CSV with empty cells
/// for missing values. Attribute columns are sorted by name.
pub fn write_attributes_csv(graph: &FullGraph, names: &[String], path: &Path) -> Result<()> {
    let mut names: Vec<String> = names.to_vec();
    names.sort();
    let mut out = String::from("node");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for v in graph.nodes() {
        let values: Vec<Option<i64>> = names.iter().map(|n| graph.attribute(v, n)).collect();
        if values.iter().all(Option::is_none) {
            continue;
        }
        out.push_str(&graph.external_label(v).to_string());
        for val in values {
            out.push(',');
            if let Some(x) = val {
                out.push_str(&x.to_string());
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
