//! `harvest` — experiment runner for budgeted target-node crawling.
//!
//! Subcommands:
//! - `run <config.json>`: execute a multi-seed experiment and write CSV/JSON
//!   results.
//! - `generate <type1|type2|type3> ...`: write a synthetic graph as an edge
//!   list plus attribute CSV and target list.
//! - `score <summary.json>...`: tournament table across experiment
//!   summaries (leader 1 point, runner-up 0.5 per graph).

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use harvest_core::datasets::{write_attributes_csv, write_edge_list, SyntheticSpec};
use harvest_core::experiment::{run_experiment, tournament_scores, ExperimentConfig, Summary};

#[derive(Parser)]
#[command(name = "harvest", version, about = "Budgeted target-node crawling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file
    Run {
        config: PathBuf,
        /// Override the config's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic graph into a directory
    Generate {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Rank crawlers across experiment summaries
    Score {
        /// summary.json files, one per graph
        summaries: Vec<PathBuf>,
        /// Also write the table as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Generator {
    /// One dense community inside a sparse background
    Type1 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        community_size: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_bg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Several dense communities; targets are their union
    Type2 {
        #[arg(long)]
        n: usize,
        /// Comma-separated block sizes, e.g. 50,50,50
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_bg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Preferential attachment with scattered targets
    Type3 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        target_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            jobs,
            out,
        } => cmd_run(config, seed, jobs, out),
        Command::Generate { generator } => cmd_generate(generator),
        Command::Score { summaries, out } => cmd_score(summaries, out),
    }
}

fn cmd_run(
    config: PathBuf,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("setting --jobs")?;
    }
    let mut cfg = ExperimentConfig::from_file(&config)
        .with_context(|| format!("reading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(dir) = out {
        cfg.out_dir = dir;
    }
    let summary = run_experiment(&cfg)?;
    println!(
        "graph {} | budget {} | {} runs | seed {}",
        summary.graph_label, summary.budget, summary.n_runs, summary.master_seed
    );
    for c in &summary.crawlers {
        println!(
            "{:>8}: median {:>7.1}  mean {:>7.1} ± {:.1}",
            c.name, c.median, c.mean, c.std
        );
    }
    println!("results in {}", cfg.out_dir.display());
    Ok(())
}

fn cmd_generate(generator: Generator) -> Result<()> {
    let (spec, out) = match generator {
        Generator::Type1 {
            n,
            community_size,
            p_in,
            p_bg,
            seed,
            out,
        } => (
            SyntheticSpec::Type1 {
                n,
                community_size,
                p_in,
                p_background: p_bg,
                seed,
            },
            out,
        ),
        Generator::Type2 {
            n,
            sizes,
            p_in,
            p_bg,
            seed,
            out,
        } => (
            SyntheticSpec::Type2 {
                n,
                sizes,
                p_in,
                p_background: p_bg,
                seed,
            },
            out,
        ),
        Generator::Type3 {
            n,
            m,
            target_prob,
            seed,
            out,
        } => (
            SyntheticSpec::Type3 {
                n,
                m,
                target_prob,
                seed,
            },
            out,
        ),
    };
    let (graph, target_spec) = spec.generate()?;
    std::fs::create_dir_all(&out)?;
    write_edge_list(&graph, &out.join("graph.edges"))?;
    write_attributes_csv(
        &graph,
        &["community".into(), "target".into()],
        &out.join("attributes.csv"),
    )?;
    let oracle = target_spec.resolve(&graph)?;
    let mut targets = String::from("# target node labels\n");
    for v in oracle.target_nodes() {
        targets.push_str(&format!("{}\n", graph.external_label(v)));
    }
    std::fs::write(out.join("targets.txt"), targets)?;
    println!(
        "wrote {}: {} nodes, {} edges, {} targets",
        out.display(),
        graph.node_count(),
        graph.edge_count(),
        oracle.target_count()
    );
    Ok(())
}

fn cmd_score(summaries: Vec<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    if summaries.len() < 1 {
        bail!("score needs at least one summary file");
    }
    let mut graphs = Vec::new();
    let mut metrics: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, path) in summaries.iter().enumerate() {
        let summary =
            Summary::from_file(path).with_context(|| format!("reading {}", path.display()))?;
        graphs.push(summary.graph_label.clone());
        for c in &summary.crawlers {
            metrics
                .entry(c.name.clone())
                .or_insert_with(|| vec![f64::NAN; summaries.len()])[i] = c.median;
        }
    }
    for (name, values) in &metrics {
        if values.iter().any(|v| v.is_nan()) {
            bail!("crawler {name:?} is missing from some summaries; score needs a full table");
        }
    }
    let totals = tournament_scores(&metrics)?;
    let mut rows: Vec<(&String, &Vec<f64>)> = metrics.iter().collect();
    rows.sort_by(|a, b| totals[b.0].total_cmp(&totals[a.0]).then(a.0.cmp(b.0)));

    let mut csv = String::from("crawler");
    for g in &graphs {
        csv.push_str(&format!(",{g}"));
    }
    csv.push_str(",total\n");
    println!("{:<10} {} {:>7}", "crawler", graphs.iter().map(|g| format!("{g:>14}")).collect::<String>(), "total");
    for (name, values) in rows {
        let mut line = format!("{name}");
        print!("{name:<10} ");
        for v in values {
            print!("{v:>14.1}");
            line.push_str(&format!(",{v}"));
        }
        println!(" {:>7.1}", totals[name]);
        line.push_str(&format!(",{}\n", totals[name]));
        csv.push_str(&line);
    }
    if let Some(path) = out {
        std::fs::write(&path, csv)?;
        println!("table written to {}", path.display());
    }
    Ok(())
}
