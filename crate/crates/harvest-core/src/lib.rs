//! Budgeted crawling of partially observed graphs.
//!
//! A crawler starts from a single observed node and spends a budget of
//! queries; each query reveals one node's neighbors and whether it belongs
//! to the target set. Crawlers rank the frontier with a predictor — a
//! heuristic, a classical classifier over structural features, or a small
//! graph neural network over 2-hop ego graphs — and predictors are retrained
//! during the crawl on samples generated by re-simulating alternative crawl
//! orders over the observed graph (sample boosting).

pub mod boosting;
pub mod crawl;
pub mod datasets;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod oracle;
pub mod predictors;
pub mod rng;

pub use crawl::CrawlState;
pub use error::{Error, Result};
pub use graph::{FullGraph, NodeId};
pub use oracle::{Oracle, TargetSpec};
