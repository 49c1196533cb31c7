//! The budgeted crawl loop.
//!
//! Each step scores every frontier candidate, crawls the argmax (ties
//! broken uniformly at random), and — in predictor mode — retrains the
//! predictor on a boosted sample batch whenever the crawled count reaches
//! the next step of the `⌊s·1.15⌋` schedule, starting at `train_from_size`.
//! Before the first training the crawler falls back to the MTN heuristic.
//!
//! Scores are logically recomputed for the whole frontier every step. The
//! engine exploits that a crawl can only change scores within three known
//! hops of the crawled node (2-hop egos over 1-hop features), so cached
//! scores outside that ball are reused; `full_rescore` disables the cache
//! and a test asserts both paths produce identical runs.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boosting::{build_samples, BoostConfig};
use crate::crawl::CrawlState;
use crate::error::{Error, Result};
use crate::features::{feature_vector, FeatureConfig};
use crate::gnn::{extract_ego, gnn_train, GnnKind, GnnModel, TrainConfig, DEFAULT_GAT_HEADS};
use crate::graph::{FullGraph, NodeId};
use crate::oracle::Oracle;
use crate::predictors::{
    knn_train, mtn_score, rf_train, KnnModel, RandomForest, DEFAULT_KNN_K, DEFAULT_RF_TREES,
};
use crate::rng::stream;

/// Crawling policy: two baselines plus predictor-guided variants.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Rc,
    Mtn,
    Knn {
        #[serde(default = "default_knn_k")]
        k: usize,
    },
    Rf {
        #[serde(default = "default_rf_trees")]
        trees: usize,
    },
    Gcn,
    Sage,
    Gat {
        #[serde(default = "default_gat_heads")]
        heads: usize,
    },
}

fn default_knn_k() -> usize {
    DEFAULT_KNN_K
}
fn default_rf_trees() -> usize {
    DEFAULT_RF_TREES
}
fn default_gat_heads() -> usize {
    DEFAULT_GAT_HEADS
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Rc => "rc",
            Policy::Mtn => "mtn",
            Policy::Knn { .. } => "knn",
            Policy::Rf { .. } => "rf",
            Policy::Gcn => "gcn",
            Policy::Sage => "sage",
            Policy::Gat { .. } => "gat",
        }
    }

    pub fn uses_predictor(&self) -> bool {
        !matches!(self, Policy::Rc | Policy::Mtn)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CrawlerConfig {
    /// Display name; defaults to the policy name.
    #[serde(default)]
    pub name: Option<String>,
    pub policy: Policy,
    /// Query budget. 0 means "inherited from the experiment config" and is
    /// rejected by `run_crawl`.
    #[serde(default)]
    pub budget: usize,
    #[serde(default = "default_train_from_size")]
    pub train_from_size: usize,
    #[serde(default = "default_retrain_exponent")]
    pub retrain_step_exponent: f64,
    #[serde(default)]
    pub boost: BoostConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub rng_seed: u64,
    /// Disable the incremental score cache (verification only).
    #[serde(default)]
    pub full_rescore: bool,
}

fn default_train_from_size() -> usize {
    10
}
fn default_retrain_exponent() -> f64 {
    1.15
}

impl CrawlerConfig {
    pub fn new(policy: Policy, budget: usize) -> Self {
        Self {
            name: None,
            policy,
            budget,
            train_from_size: default_train_from_size(),
            retrain_step_exponent: default_retrain_exponent(),
            boost: BoostConfig::default(),
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            rng_seed: 0,
            full_rescore: false,
        }
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or_else(|| self.policy.name())
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget must be >= 1".into()));
        }
        if self.train_from_size == 0 {
            return Err(Error::InvalidParameter(
                "train_from_size must be >= 1".into(),
            ));
        }
        if self.retrain_step_exponent <= 1.0 {
            return Err(Error::InvalidParameter(
                "retrain_step_exponent must be > 1".into(),
            ));
        }
        self.boost.validate()?;
        self.features.validate()?;
        self.train.validate()
    }
}

/// One crawl query and its outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    /// 1-based query index.
    pub step: usize,
    pub node: NodeId,
    pub is_target: bool,
    /// Targets collected up to and including this step.
    pub cumulative: usize,
    /// True when the predictor was retrained right after this step.
    pub retrained: bool,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed_node: NodeId,
    pub records: Vec<StepRecord>,
    /// Crawled counts at which the predictor was retrained.
    pub retrain_steps: Vec<usize>,
    /// True when the frontier emptied before the budget was spent.
    pub exhausted_early: bool,
    pub wall_time: Duration,
}

impl RunResult {
    pub fn targets_collected(&self) -> usize {
        self.records.last().map_or(0, |r| r.cumulative)
    }
}

/// Number of target nodes a finished run collected (the seed counts: it
/// consumed a query).
pub fn targets_collected(r: &RunResult) -> usize {
    r.targets_collected()
}

/// Next scheduled retraining step: `⌊s·exponent⌋`, bumped by one when the
/// floor makes no progress. The 1e-9 nudge removes binary representation
/// error so that e.g. `100 · 1.15` floors to 115, not 114.
pub fn next_retrain_step(s: usize, exponent: f64) -> usize {
    let next = (s as f64 * exponent + 1e-9).floor() as usize;
    if next <= s {
        s + 1
    } else {
        next
    }
}

/// Argmax over candidate scores; exact ties are broken uniformly at random.
pub fn select_next(scores: &[(NodeId, f64)], rng: &mut ChaCha8Rng) -> Result<NodeId> {
    if scores.is_empty() {
        return Err(Error::GraphExhausted);
    }
    let best = scores
        .iter()
        .map(|&(_, s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<NodeId> = scores
        .iter()
        .filter(|&&(_, s)| s == best)
        .map(|&(v, _)| v)
        .collect();
    Ok(tied[rng.random_range(0..tied.len())])
}

enum Model {
    Untrained,
    Knn(KnnModel),
    Rf(RandomForest),
    Gnn(GnnModel),
}

impl Model {
    fn score(&self, state: &CrawlState, v: NodeId, features: &FeatureConfig) -> Result<f64> {
        match self {
            Model::Untrained => Ok(mtn_score(state, v)),
            Model::Knn(m) => m.score(&feature_vector(state, v, features)?.values),
            Model::Rf(m) => m.score(&feature_vector(state, v, features)?.values),
            Model::Gnn(m) => Ok(m.score(&extract_ego(state, v)?)),
        }
    }
}

/// Runs one budgeted crawl from a target seed node.
pub fn run_crawl(
    full: &FullGraph,
    oracle: &Oracle,
    cfg: &CrawlerConfig,
    seed_node: NodeId,
) -> Result<RunResult> {
    cfg.validate()?;
    if !full.contains(seed_node) {
        return Err(Error::SeedNotInGraph);
    }
    if !oracle.peek_is_target(seed_node) {
        return Err(Error::NonTargetSeed(seed_node));
    }
    let started = Instant::now();
    let mut rng = stream(cfg.rng_seed, &[]);
    let mut state = CrawlState::init_crawl(full, seed_node)?;
    let mut model = Model::Untrained;
    let mut next_retrain = cfg.train_from_size;
    let mut cache: HashMap<NodeId, f64> = HashMap::new();
    let mut records = Vec::with_capacity(cfg.budget);
    let mut retrain_steps = Vec::new();
    let mut cumulative = 0usize;
    let mut exhausted_early = false;

    for step in 1..=cfg.budget {
        if state.frontier_len() == 0 {
            exhausted_early = true;
            break;
        }
        let choice = match cfg.policy {
            Policy::Rc => {
                let frontier: Vec<NodeId> = state.frontier().collect();
                frontier[rng.random_range(0..frontier.len())]
            }
            Policy::Mtn => {
                let scores: Vec<(NodeId, f64)> = state
                    .frontier()
                    .map(|v| (v, mtn_score(&state, v)))
                    .collect();
                select_next(&scores, &mut rng)?
            }
            _ => {
                let scores = if matches!(model, Model::Untrained) {
                    state
                        .frontier()
                        .map(|v| (v, mtn_score(&state, v)))
                        .collect::<Vec<_>>()
                } else {
                    frontier_scores(&state, &model, cfg, &mut cache)?
                };
                select_next(&scores, &mut rng)?
            }
        };

        let label = state.crawl(full, oracle, choice)?;
        if label {
            cumulative += 1;
        }
        if !cfg.full_rescore && !matches!(model, Model::Untrained) {
            // scores can change only within 3 known hops of the new node
            cache.remove(&choice);
            for (u, _) in state.known_ball(choice, 3) {
                cache.remove(&u);
            }
        }

        let mut retrained = false;
        if cfg.policy.uses_predictor() && state.crawled_count() == next_retrain {
            model = train_model(&state, cfg, &mut rng)?;
            cache.clear();
            retrained = true;
            retrain_steps.push(state.crawled_count());
            next_retrain = next_retrain_step(next_retrain, cfg.retrain_step_exponent);
        }

        records.push(StepRecord {
            step,
            node: choice,
            is_target: label,
            cumulative,
            retrained,
        });
    }

    #[cfg(debug_assertions)]
    state
        .check_invariants()
        .expect("crawl state invariants must hold");

    Ok(RunResult {
        seed_node,
        records,
        retrain_steps,
        exhausted_early,
        wall_time: started.elapsed(),
    })
}

/// Scores for every frontier candidate in ascending node order, reusing
/// cached values that the last crawls could not have changed.
fn frontier_scores(
    state: &CrawlState,
    model: &Model,
    cfg: &CrawlerConfig,
    cache: &mut HashMap<NodeId, f64>,
) -> Result<Vec<(NodeId, f64)>> {
    let frontier: Vec<NodeId> = state.frontier().collect();
    let missing: Vec<NodeId> = if cfg.full_rescore {
        frontier.clone()
    } else {
        frontier
            .iter()
            .copied()
            .filter(|v| !cache.contains_key(v))
            .collect()
    };
    let computed: Vec<f64> = if missing.len() >= 64 {
        missing
            .par_iter()
            .map(|&v| model.score(state, v, &cfg.features))
            .collect::<Result<_>>()?
    } else {
        missing
            .iter()
            .map(|&v| model.score(state, v, &cfg.features))
            .collect::<Result<_>>()?
    };
    if cfg.full_rescore {
        return Ok(missing.into_iter().zip(computed).collect());
    }
    for (v, s) in missing.iter().zip(computed) {
        cache.insert(*v, s);
    }
    Ok(frontier.into_iter().map(|v| (v, cache[&v])).collect())
}

fn train_model(state: &CrawlState, cfg: &CrawlerConfig, rng: &mut ChaCha8Rng) -> Result<Model> {
    let batch = build_samples(state, &cfg.boost, &cfg.features, rng)?;
    Ok(match cfg.policy {
        Policy::Knn { k } => Model::Knn(knn_train(&batch.classical, k)?),
        Policy::Rf { trees } => {
            Model::Rf(rf_train(&batch.classical, trees, rng.random::<u64>())?)
        }
        Policy::Gcn => Model::Gnn(gnn_train(
            GnnKind::Gcn,
            1,
            &batch.ego,
            &cfg.train,
            rng.random::<u64>(),
        )?),
        Policy::Sage => Model::Gnn(gnn_train(
            GnnKind::Sage,
            1,
            &batch.ego,
            &cfg.train,
            rng.random::<u64>(),
        )?),
        Policy::Gat { heads } => Model::Gnn(gnn_train(
            GnnKind::Gat,
            heads,
            &batch.ego,
            &cfg.train,
            rng.random::<u64>(),
        )?),
        Policy::Rc | Policy::Mtn => unreachable!("baselines are never trained"),
    })
}
