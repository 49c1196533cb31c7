//! Sample boosting: training data from re-simulated crawl orders.
//!
//! The crawler could have collected the same crawled set in many different
//! orders; each valid order yields a different sequence of knowledge
//! snapshots. Re-simulating orders over the current observed graph and
//! harvesting the last fraction of each sequence multiplies the training
//! data available early in a crawl. Class balance is restored per sequence
//! by walking earlier positions backwards for minority samples and dropping
//! random majority excess.
//!
//! Snapshot reconstruction replays prefixes against the real state's known
//! adjacency — legitimate, since a crawled node's full neighborhood is
//! already known, so no snapshot can contain an edge the crawler has not
//! seen.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crawl::CrawlState;
use crate::error::{Error, Result};
use crate::features::{feature_vector, FeatureConfig};
use crate::gnn::{extract_ego, EgoGraph};
use crate::graph::NodeId;
use crate::predictors::{Provenance, TrainingSet};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoostMode {
    /// Re-simulate alternative crawl orders.
    Boosted,
    /// Use only the snapshots of the real crawl order.
    Historical,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoostConfig {
    #[serde(default = "default_max_samples")]
    pub train_max_samples: usize,
    #[serde(default = "default_boost_iterations")]
    pub max_boost_iterations: usize,
    #[serde(default = "default_fraction")]
    pub last_boost_steps_fraction: f64,
    #[serde(default = "default_mode")]
    pub mode: BoostMode,
}

fn default_max_samples() -> usize {
    300
}
fn default_boost_iterations() -> usize {
    20
}
fn default_fraction() -> f64 {
    0.2
}
fn default_mode() -> BoostMode {
    BoostMode::Boosted
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            train_max_samples: default_max_samples(),
            max_boost_iterations: default_boost_iterations(),
            last_boost_steps_fraction: default_fraction(),
            mode: default_mode(),
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_max_samples == 0 || self.max_boost_iterations == 0 {
            return Err(Error::InvalidParameter(
                "boost counts must be positive".into(),
            ));
        }
        if !(self.last_boost_steps_fraction > 0.0 && self.last_boost_steps_fraction <= 1.0) {
            return Err(Error::InvalidParameter(
                "last_boost_steps_fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Paired training representations produced from the same snapshots.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub classical: TrainingSet,
    pub ego: Vec<EgoGraph>,
    /// Set when class balancing was impossible (single-class crawl).
    pub warning: Option<String>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.ego.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ego.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let t = self
            .classical
            .samples
            .iter()
            .filter(|(_, l)| *l)
            .count();
        (t, self.classical.samples.len() - t)
    }
}

/// A uniformly random prefix-connected permutation of the crawled set,
/// starting at the first actually-crawled node.
pub fn simulate_sequence(state: &CrawlState, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
    let order = state.crawled_order();
    assert!(!order.is_empty(), "simulate_sequence needs a crawled node");
    let n = state.node_space();
    let mut taken = vec![false; n];
    let mut queued = vec![false; n];
    let mut seq = Vec::with_capacity(order.len());
    let mut eligible: Vec<NodeId> = Vec::new();

    let push_frontier = |v: NodeId,
                         taken: &[bool],
                         queued: &mut [bool],
                         eligible: &mut Vec<NodeId>,
                         state: &CrawlState| {
        for &u in state.known_neighbors(v) {
            if state.is_crawled(u) && !taken[u.index()] && !queued[u.index()] {
                queued[u.index()] = true;
                eligible.push(u);
            }
        }
    };

    let first = order[0];
    taken[first.index()] = true;
    seq.push(first);
    push_frontier(first, &taken, &mut queued, &mut eligible, state);
    while seq.len() < order.len() {
        let idx = rng.random_range(0..eligible.len());
        let v = eligible.swap_remove(idx);
        taken[v.index()] = true;
        seq.push(v);
        push_frontier(v, &taken, &mut queued, &mut eligible, state);
    }
    seq
}

/// True iff every element after the first is adjacent (known edges) to an
/// earlier element — the validity condition for simulated orders.
pub fn validate_sequence(state: &CrawlState, seq: &[NodeId]) -> bool {
    if seq.is_empty() || seq[0] != state.crawled_order()[0] {
        return false;
    }
    let mut in_prefix = vec![false; state.node_space()];
    in_prefix[seq[0].index()] = true;
    for &v in &seq[1..] {
        if !state
            .known_neighbors(v)
            .iter()
            .any(|u| in_prefix[u.index()])
        {
            return false;
        }
        in_prefix[v.index()] = true;
    }
    true
}

/// Walks a crawl order against the real state's knowledge, exposing the
/// intermediate snapshot before each position. O(revealed edges) per full
/// sequence rather than per position.
pub struct SnapshotWalker<'a> {
    real: &'a CrawlState,
    seq: &'a [NodeId],
    snap: CrawlState,
    next: usize, // 0-based index of the next sequence position to crawl
}

impl<'a> SnapshotWalker<'a> {
    pub fn new(real: &'a CrawlState, seq: &'a [NodeId]) -> Self {
        Self {
            real,
            seq,
            snap: CrawlState::with_size(real.node_space(), real.seed()),
            next: 0,
        }
    }

    /// Snapshot induced by the prefix crawled so far.
    pub fn snapshot(&self) -> &CrawlState {
        &self.snap
    }

    /// Crawls the next position using the real state's revealed adjacency
    /// and label.
    pub fn step(&mut self) {
        let v = self.seq[self.next];
        debug_assert!(self.real.is_crawled(v));
        self.snap.advance(
            v,
            self.real.known_neighbors(v),
            self.real.label(v).expect("crawled nodes are labeled"),
        );
        self.next += 1;
    }

    /// 1-based position of the next uncrawled sequence element.
    pub fn position(&self) -> usize {
        self.next + 1
    }
}

/// The partial state induced by crawling `prefix[0..i-1]` (1-based `i`).
pub fn reconstruct_snapshot(real: &CrawlState, prefix: &[NodeId], i: usize) -> CrawlState {
    assert!(i >= 1 && i <= prefix.len(), "position out of range");
    let mut walker = SnapshotWalker::new(real, prefix);
    for _ in 0..i - 1 {
        walker.step();
    }
    walker.snap
}

/// Builds a balanced training batch for the current crawl state.
pub fn build_samples(
    state: &CrawlState,
    cfg: &BoostConfig,
    feat_cfg: &FeatureConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SampleBatch> {
    cfg.validate()?;
    feat_cfg.validate()?;
    let n = state.crawled_count();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "sample building needs at least 2 crawled nodes".into(),
        ));
    }
    match cfg.mode {
        BoostMode::Historical => historical_samples(state, cfg, feat_cfg),
        BoostMode::Boosted => boosted_samples(state, cfg, feat_cfg, rng),
    }
}

fn historical_samples(
    state: &CrawlState,
    cfg: &BoostConfig,
    feat_cfg: &FeatureConfig,
) -> Result<SampleBatch> {
    let order = state.crawled_order();
    let n = order.len();
    let k = n.min(cfg.train_max_samples);
    let first_pos = n - k + 1;
    let mut fvs = Vec::with_capacity(k);
    let mut egos = Vec::with_capacity(k);
    let mut walker = SnapshotWalker::new(state, order);
    for pos in 1..=n {
        if pos >= first_pos {
            let v = order[pos - 1];
            emit(state, walker.snapshot(), v, feat_cfg, &mut fvs, &mut egos)?;
        }
        walker.step();
    }
    Ok(SampleBatch {
        classical: TrainingSet::new(fvs, Provenance::Historical)?,
        ego: egos,
        warning: None,
    })
}

fn boosted_samples(
    state: &CrawlState,
    cfg: &BoostConfig,
    feat_cfg: &FeatureConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SampleBatch> {
    let n = state.crawled_count();
    let take = ((cfg.last_boost_steps_fraction * n as f64).ceil() as usize).clamp(1, n);
    let cutoff = n - take; // window is positions (cutoff, n], 1-based
    let both_classes = {
        let t = state
            .crawled_order()
            .iter()
            .filter(|&&v| state.label(v) == Some(true))
            .count();
        t > 0 && t < n
    };

    let mut fvs = Vec::new();
    let mut egos = Vec::new();
    for _ in 0..cfg.max_boost_iterations {
        if egos.len() >= cfg.train_max_samples {
            break;
        }
        let seq = simulate_sequence(state, rng);
        let selected = plan_selection(state, &seq, cutoff, rng);
        let last = *selected.last().expect("window is never empty");
        let mut ptr = 0;
        let mut walker = SnapshotWalker::new(state, &seq);
        for pos in 1..=last {
            if ptr < selected.len() && selected[ptr] == pos {
                ptr += 1;
                emit(state, walker.snapshot(), seq[pos - 1], feat_cfg, &mut fvs, &mut egos)?;
            }
            walker.step();
        }
    }

    truncate_balanced(&mut fvs, &mut egos, cfg.train_max_samples);
    let warning = if both_classes {
        None
    } else {
        let msg = "single-class crawl: balancing impossible".to_string();
        log::warn!("{msg}");
        Some(msg)
    };
    Ok(SampleBatch {
        classical: TrainingSet::new(fvs, Provenance::Boosted)?,
        ego: egos,
        warning,
    })
}

/// Chooses the sampled positions of one sequence: the trailing window, plus
/// minority-class positions walking backwards from the cutoff, minus random
/// majority excess when the minority runs out. Returns sorted positions.
fn plan_selection(
    state: &CrawlState,
    seq: &[NodeId],
    cutoff: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = seq.len();
    let label_at = |pos: usize| state.label(seq[pos - 1]) == Some(true);
    let mut t: Vec<usize> = Vec::new(); // target positions selected
    let mut f: Vec<usize> = Vec::new();
    for pos in cutoff + 1..=n {
        if label_at(pos) {
            t.push(pos);
        } else {
            f.push(pos);
        }
    }
    // add minority from earlier positions, most recent first
    let mut pos = cutoff;
    while pos >= 1 && t.len() != f.len() {
        let minority_is_target = t.len() < f.len();
        if label_at(pos) == minority_is_target {
            if minority_is_target {
                t.push(pos);
            } else {
                f.push(pos);
            }
        }
        pos -= 1;
    }
    // if one class is exhausted, drop random majority excess
    let (maj, min_len) = if t.len() > f.len() {
        (&mut t, f.len())
    } else {
        (&mut f, t.len())
    };
    while maj.len() > min_len && min_len > 0 {
        let idx = rng.random_range(0..maj.len());
        maj.swap_remove(idx);
    }
    let mut selected: Vec<usize> = t.into_iter().chain(f).collect();
    selected.sort_unstable();
    selected
}

fn emit(
    real: &CrawlState,
    snap: &CrawlState,
    v: NodeId,
    feat_cfg: &FeatureConfig,
    fvs: &mut Vec<(crate::features::FeatureVector, bool)>,
    egos: &mut Vec<EgoGraph>,
) -> Result<()> {
    let label = real.label(v).expect("sampled nodes are crawled in reality");
    fvs.push((feature_vector(snap, v, feat_cfg)?, label));
    egos.push(extract_ego(snap, v)?.with_label(label));
    Ok(())
}

/// Truncates both representations to `cap` keeping class counts within one
/// of each other whenever possible.
fn truncate_balanced(
    fvs: &mut Vec<(crate::features::FeatureVector, bool)>,
    egos: &mut Vec<EgoGraph>,
    cap: usize,
) {
    if fvs.len() <= cap {
        return;
    }
    let total_t = fvs.iter().filter(|(_, l)| *l).count();
    let total_f = fvs.len() - total_t;
    let mut quota_t = total_t.min(cap.div_ceil(2));
    let mut quota_f = total_f.min(cap - quota_t);
    quota_t = total_t.min(cap - quota_f);
    let mut keep = Vec::with_capacity(cap);
    for (i, (_, label)) in fvs.iter().enumerate() {
        let q = if *label { &mut quota_t } else { &mut quota_f };
        if *q > 0 {
            *q -= 1;
            keep.push(i);
        }
    }
    let keep_set: std::collections::BTreeSet<usize> = keep.into_iter().collect();
    let mut i = 0;
    fvs.retain(|_| {
        let k = keep_set.contains(&i);
        i += 1;
        k
    });
    i = 0;
    egos.retain(|_| {
        let k = keep_set.contains(&i);
        i += 1;
        k
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FullGraph;
    use crate::oracle::{Oracle, TargetSpec};
    use rand_chacha::rand_core::SeedableRng;
    use std::collections::BTreeSet;
    use std::collections::HashMap;

    fn oracle_of(g: &FullGraph, targets: &[u32]) -> Oracle {
        TargetSpec::Members(targets.iter().map(|&v| NodeId(v)).collect())
            .resolve(g)
            .unwrap()
    }

    fn crawl(g: &FullGraph, oracle: &Oracle, order: &[u32]) -> CrawlState {
        let mut st = CrawlState::init_crawl(g, NodeId(order[0])).unwrap();
        for &v in order {
            st.crawl(g, oracle, NodeId(v)).unwrap();
        }
        st
    }

    #[test]
    fn single_crawled_node_yields_trivial_sequence() {
        let g = FullGraph::from_edges([(0, 1)]).unwrap();
        let oracle = oracle_of(&g, &[0]);
        let st = crawl(&g, &oracle, &[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(simulate_sequence(&st, &mut rng), vec![NodeId(0)]);
    }

    #[test]
    fn path_has_a_unique_valid_order() {
        let g = FullGraph::from_edges([(0, 1), (1, 2)]).unwrap();
        let oracle = oracle_of(&g, &[0]);
        let st = crawl(&g, &oracle, &[0, 1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(
                simulate_sequence(&st, &mut rng),
                vec![NodeId(0), NodeId(1), NodeId(2)]
            );
        }
    }

    #[test]
    fn star_orders_are_uniform() {
        // center 0 crawled first, then 3 leaves in any order: 6 valid orders
        let g = FullGraph::from_edges([(0, 1), (0, 2), (0, 3)]).unwrap();
        let oracle = oracle_of(&g, &[0]);
        let st = crawl(&g, &oracle, &[0, 1, 2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts: HashMap<Vec<NodeId>, usize> = HashMap::new();
        for _ in 0..600 {
            let seq = simulate_sequence(&st, &mut rng);
            assert!(validate_sequence(&st, &seq));
            *counts.entry(seq).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        // chi-squared against uniform, 5 dof, alpha = 0.01 -> 15.086
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - 100.0).powi(2) / 100.0)
            .sum();
        assert!(chi2 < 15.086, "chi2 = {chi2}");
    }

    #[test]
    fn reconstruction_matches_direct_replay() {
        let g = FullGraph::from_edges([
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 3),
            (3, 4),
            (1, 4),
            (4, 5),
        ])
        .unwrap();
        let oracle = oracle_of(&g, &[0, 3, 5]);
        let st = crawl(&g, &oracle, &[0, 1, 2, 4, 3]);
        let order = st.crawled_order().to_vec();
        for i in 1..=order.len() {
            let snap = reconstruct_snapshot(&st, &order, i);
            // direct replay through the ordinary crawl path
            let mut direct = CrawlState::init_crawl(&g, NodeId(0)).unwrap();
            for &v in &order[..i - 1] {
                direct.crawl(&g, &oracle, v).unwrap();
            }
            assert_eq!(snap, direct, "position {i}");
            snap.check_invariants().unwrap();
            // no leaked knowledge: every snapshot edge is known in reality
            for u in g.nodes() {
                for &w in snap.known_neighbors(u) {
                    assert!(st.has_known_edge(u, w));
                }
            }
        }
    }

    #[test]
    fn triangle_snapshot_example() {
        let g = FullGraph::from_edges([(0, 1), (1, 2), (0, 2)]).unwrap();
        let oracle = oracle_of(&g, &[0]);
        let st = crawl(&g, &oracle, &[0, 1, 2]);
        let prefix = [NodeId(0), NodeId(1), NodeId(2)];
        let snap = reconstruct_snapshot(&st, &prefix, 3);
        assert!(snap.is_observed(NodeId(2)) && !snap.is_crawled(NodeId(2)));
        assert_eq!(snap.known_degree(NodeId(2)).unwrap(), 2);
        // i = 1 is the initial state
        let init = reconstruct_snapshot(&st, &prefix, 1);
        assert_eq!(init.crawled_count(), 0);
        assert!(init.is_observed(NodeId(0)));
    }

    fn ladder_graph_state(targets: &[u32], steps: usize) -> (FullGraph, CrawlState) {
        // 2 x k grid: connected, has branching orders
        let k = 8u64;
        let mut edges = Vec::new();
        for i in 0..k {
            edges.push((2 * i, 2 * i + 1));
            if i + 1 < k {
                edges.push((2 * i, 2 * (i + 1)));
                edges.push((2 * i + 1, 2 * (i + 1) + 1));
            }
        }
        let g = FullGraph::from_edges(edges).unwrap();
        let oracle = oracle_of(&g, targets);
        let mut st = CrawlState::init_crawl(&g, NodeId(0)).unwrap();
        for _ in 0..steps {
            let v = st.frontier().next().unwrap();
            st.crawl(&g, &oracle, v).unwrap();
        }
        (g, st)
    }

    #[test]
    fn window_size_and_cap() {
        let (_, st) = ladder_graph_state(&[0, 2, 4, 6, 8], 10);
        assert_eq!(st.crawled_count(), 10);
        let cfg = BoostConfig {
            max_boost_iterations: 1,
            ..BoostConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch = build_samples(&st, &cfg, &FeatureConfig::default(), &mut rng).unwrap();
        // ceil(0.2 * 10) = 2 window samples, balancing may add up to 1 more
        // (it adds until counts are equal)
        let (t, f) = batch.class_counts();
        assert!(batch.len() >= 2 && batch.len() <= 4);
        assert!(t.abs_diff(f) <= 1, "unbalanced: {t} vs {f}");
        assert_eq!(batch.classical.len(), batch.ego.len());

        let cfg20 = BoostConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = build_samples(&st, &cfg20, &FeatureConfig::default(), &mut rng).unwrap();
        assert!(batch.len() <= 300);
        let (t, f) = batch.class_counts();
        assert!(t.abs_diff(f) <= 1);
    }

    #[test]
    fn single_class_records_a_warning() {
        let (_, st) = ladder_graph_state(&(0..16).collect::<Vec<_>>(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch =
            build_samples(&st, &BoostConfig::default(), &FeatureConfig::default(), &mut rng)
                .unwrap();
        assert!(batch.warning.is_some());
        let (t, f) = batch.class_counts();
        assert_eq!(f, 0);
        assert!(t > 0);
    }

    #[test]
    fn boosted_real_order_equals_historical_on_forced_path() {
        // path: unique valid order; 2 targets / 2 non-targets -> no balancing
        let g = FullGraph::from_edges([(0, 1), (1, 2), (2, 3)]).unwrap();
        let oracle = oracle_of(&g, &[0, 2]);
        let st = crawl(&g, &oracle, &[0, 1, 2, 3]);
        let feat = FeatureConfig::default();
        let boosted_cfg = BoostConfig {
            max_boost_iterations: 1,
            last_boost_steps_fraction: 1.0,
            ..BoostConfig::default()
        };
        let hist_cfg = BoostConfig {
            mode: BoostMode::Historical,
            ..BoostConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let boosted = build_samples(&st, &boosted_cfg, &feat, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let hist = build_samples(&st, &hist_cfg, &feat, &mut rng).unwrap();
        assert_eq!(boosted.classical.samples, hist.classical.samples);
        assert_eq!(boosted.ego, hist.ego);
    }

    #[test]
    fn sequences_are_always_prefix_connected() {
        for seed in 0..20 {
            let (_, st) = ladder_graph_state(&[0, 3, 5], 9);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = simulate_sequence(&st, &mut rng);
            assert!(validate_sequence(&st, &seq));
            assert_eq!(
                seq.iter().collect::<BTreeSet<_>>(),
                st.crawled_order().iter().collect::<BTreeSet<_>>()
            );
        }
    }

    #[test]
    fn truncation_preserves_balance() {
        let (_, st) = ladder_graph_state(&[0, 2, 4, 6, 8, 10], 12);
        let cfg = BoostConfig {
            train_max_samples: 5,
            ..BoostConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let batch = build_samples(&st, &cfg, &FeatureConfig::default(), &mut rng).unwrap();
        assert_eq!(batch.len(), 5);
        let (t, f) = batch.class_counts();
        assert!(t.abs_diff(f) <= 1, "{t} vs {f}");
    }
}
