//! Configuration-driven experiments: paired multi-seed runs over one graph,
//! median aggregation, tournament scoring across configurations, and
//! deterministic result files.
//!
//! Every run seed is derived from the master seed, every crawler sees the
//! same per-run start node (paired comparison), and output files are a pure
//! function of (config, master seed) — wall-clock timings never reach disk.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::GraphSource;
use crate::engine::{run_crawl, CrawlerConfig, RunResult};
use crate::error::{Error, Result};
use crate::graph::{FullGraph, NodeId};
use crate::oracle::{load_membership_list, TargetSpec};
use crate::rng::{derive_seed, stream};

/// Target set selection in config files; the file-based variant loads a
/// membership list relative to the current directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum TargetsConfig {
    AttributeEquals { name: String, value: i64 },
    Members(BTreeSet<NodeId>),
    CommunityId(i64),
    MembersFile { path: PathBuf },
}

impl TargetsConfig {
    pub fn to_spec(&self, graph: &FullGraph) -> Result<TargetSpec> {
        Ok(match self {
            TargetsConfig::AttributeEquals { name, value } => TargetSpec::AttributeEquals {
                name: name.clone(),
                value: *value,
            },
            TargetsConfig::Members(set) => TargetSpec::Members(set.clone()),
            TargetsConfig::CommunityId(b) => TargetSpec::CommunityId(*b),
            TargetsConfig::MembersFile { path } => load_membership_list(path, graph)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    /// Optional for synthetic sources (the generator defines targets).
    #[serde(default)]
    pub targets: Option<TargetsConfig>,
    pub crawlers: Vec<CrawlerConfig>,
    pub budget: usize,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

fn default_n_runs() -> usize {
    11
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be >= 1".into()));
        }
        if self.crawlers.is_empty() {
            return Err(Error::Config("at least one crawler is required".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.crawlers {
            if c.budget != 0 && c.budget != self.budget {
                return Err(Error::Config(format!(
                    "crawler {} sets budget {} but the experiment budget is {}",
                    c.display_name(),
                    c.budget,
                    self.budget
                )));
            }
            let name = c.display_name().to_string();
            if name.is_empty()
                || !name
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
            {
                return Err(Error::Config(format!(
                    "crawler name {name:?} must be non-empty [A-Za-z0-9_-]"
                )));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!(
                    "duplicate crawler name {name:?}; set distinct names"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CrawlerSummary {
    pub name: String,
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation across runs.
    pub std: f64,
    pub runs: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub graph_label: String,
    pub budget: usize,
    pub n_runs: usize,
    pub master_seed: u64,
    /// External labels of the per-run seed nodes (shared by all crawlers).
    pub seed_nodes: Vec<u64>,
    pub crawlers: Vec<CrawlerSummary>,
}

impl Summary {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn crawler(&self, name: &str) -> Option<&CrawlerSummary> {
        self.crawlers.iter().find(|c| c.name == name)
    }
}

/// Middle order statistic; mean of the two middles for even length.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Cross-configuration ranking: per graph the best metric earns 1 point and
/// the runner-up 0.5; ties share the higher score. Input maps config name
/// to its per-graph metrics (all vectors the same length).
pub fn tournament_scores(metrics: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, f64>> {
    if metrics.len() < 2 {
        return Err(Error::Config("tournament needs at least 2 configs".into()));
    }
    let n_graphs = metrics.values().next().map_or(0, Vec::len);
    if n_graphs == 0 || metrics.values().any(|v| v.len() != n_graphs) {
        return Err(Error::Config(
            "every config needs the same non-zero number of graph metrics".into(),
        ));
    }
    let mut totals: BTreeMap<String, f64> =
        metrics.keys().map(|k| (k.clone(), 0.0)).collect();
    for g in 0..n_graphs {
        let mut values: Vec<f64> = metrics.values().map(|v| v[g]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let best = values.last().copied().unwrap();
        let second = values.len().checked_sub(2).map(|i| values[i]);
        for (name, v) in metrics {
            if v[g] == best {
                *totals.get_mut(name).unwrap() += 1.0;
            } else if Some(v[g]) == second {
                *totals.get_mut(name).unwrap() += 0.5;
            }
        }
    }
    Ok(totals)
}

/// Runs every crawler over `n_runs` paired seeds and writes all result
/// files under `out_dir`. Returns the summary (also written as JSON).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let (graph, generated_targets) = cfg.graph.resolve()?;
    let spec = match (&cfg.targets, generated_targets) {
        (Some(t), _) => t.to_spec(&graph)?,
        (None, Some(spec)) => spec,
        (None, None) => {
            return Err(Error::Config(
                "edge-list sources need an explicit targets entry".into(),
            ))
        }
    };
    let oracle = spec.resolve(&graph)?;
    let targets: Vec<NodeId> = oracle.target_nodes().collect();

    // paired seed nodes: one per run index, shared by every crawler
    let seed_nodes: Vec<NodeId> = (0..cfg.n_runs)
        .map(|r| {
            let mut rng = stream(cfg.master_seed, &[0, r as u64]);
            targets[rng.random_range(0..targets.len())]
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cfg.crawlers.len())
        .flat_map(|c| (0..cfg.n_runs).map(move |r| (c, r)))
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut crawler = cfg.crawlers[c].clone();
            crawler.budget = cfg.budget;
            crawler.rng_seed = derive_seed(cfg.master_seed, &[1, r as u64, c as u64]);
            run_crawl(&graph, &oracle, &crawler, seed_nodes[r])
        })
        .collect::<Result<_>>()?;
    let mut by_crawler: Vec<Vec<RunResult>> = Vec::with_capacity(cfg.crawlers.len());
    let mut it = results.into_iter();
    for _ in 0..cfg.crawlers.len() {
        by_crawler.push((&mut it).take(cfg.n_runs).collect());
    }

    let crawlers = cfg
        .crawlers
        .iter()
        .zip(&by_crawler)
        .map(|(c, runs)| {
            let counts: Vec<usize> = runs.iter().map(RunResult::targets_collected).collect();
            let as_f64: Vec<f64> = counts.iter().map(|&v| v as f64).collect();
            let mean = as_f64.iter().sum::<f64>() / as_f64.len() as f64;
            let var =
                as_f64.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / as_f64.len() as f64;
            Ok(CrawlerSummary {
                name: c.display_name().to_string(),
                median: median(&as_f64)?,
                mean,
                std: var.sqrt(),
                runs: counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = Summary {
        graph_label: cfg.graph.label(),
        budget: cfg.budget,
        n_runs: cfg.n_runs,
        master_seed: cfg.master_seed,
        seed_nodes: seed_nodes.iter().map(|&v| graph.external_label(v)).collect(),
        crawlers,
    };
    write_outputs(cfg, &graph, &by_crawler, &summary)?;
    Ok(summary)
}

/// Per-run CSVs (`step,node,is_target,cumulative`) plus one median-curve CSV
/// per crawler with exactly `budget` rows; runs that exhausted the graph
/// early are carried forward at their final value.
fn write_outputs(
    cfg: &ExperimentConfig,
    graph: &FullGraph,
    by_crawler: &[Vec<RunResult>],
    summary: &Summary,
) -> Result<()> {
    let runs_dir = cfg.out_dir.join("runs");
    std::fs::create_dir_all(&runs_dir)?;
    for (c, runs) in cfg.crawlers.iter().zip(by_crawler) {
        let name = c.display_name();
        for (r, run) in runs.iter().enumerate() {
            let mut text = String::from("step,node,is_target,cumulative\n");
            for rec in &run.records {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    rec.step,
                    graph.external_label(rec.node),
                    u8::from(rec.is_target),
                    rec.cumulative
                ));
            }
            std::fs::write(runs_dir.join(format!("{name}_run{r:03}.csv")), text)?;
        }
        let mut text = String::from("step,median_cumulative\n");
        for step in 1..=cfg.budget {
            let at_step: Vec<f64> = runs
                .iter()
                .map(|run| {
                    run.records
                        .iter()
                        .take_while(|rec| rec.step <= step)
                        .last()
                        .map_or(0.0, |rec| rec.cumulative as f64)
                })
                .collect();
            text.push_str(&format!("{step},{}\n", median(&at_step)?));
        }
        std::fs::write(cfg.out_dir.join(format!("median_{name}.csv")), text)?;
    }
    let json = serde_json::to_string_pretty(summary)?;
    std::fs::write(cfg.out_dir.join("summary.json"), json + "\n")?;
    Ok(())
}
