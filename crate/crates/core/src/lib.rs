//! Quarterly inter-industry payment networks: ingestion, graph construction,
//! structural feature extraction, growth forecasting with in-repo tree
//! ensembles, and forecast model comparison.
//!
//! The pipeline turns dated payment records into one directed weighted graph
//! per quarter, measures each graph (centralities, clustering, density, path
//! lengths, two-hop connectivity), assembles pair-level growth forecasting
//! datasets under three feature specifications, evaluates them over
//! expanding windows, and reports pooled and period-segmented comparisons
//! including the Diebold-Mariano statistic.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod export;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod quarter;
pub mod report;
pub mod roster;
pub mod synth;

pub use error::{Error, Result};
pub use quarter::{Quarter, YearMonth};
pub use roster::IndustryRoster;
