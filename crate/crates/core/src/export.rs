//! File artifact writers: feature CSVs, adjacency matrix dumps, yearly DOT
//! snapshots, and the persisted dataset with its sidecar schema.
//!
//! Every emitted file starts with a stamp line carrying the config hash and
//! seed, so any artifact can be traced back to the run that produced it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::ForecastDataset;
use crate::error::Result;
use crate::features::FeatureTable;
use crate::graph::{QuarterlyGraph, SquareMatrix};
use crate::roster::{category_color, IndustryRoster};

/// Stamp line placed at the top of every artifact.
pub fn stamp(config_hash: &str, seed: u64) -> String {
    format!("# paynet config_hash={config_hash} seed={seed}\n")
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip form: exact and byte-stable.
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// One row per (quarter, industry) with every node feature.
pub fn node_features_csv(tables: &[FeatureTable], roster: &IndustryRoster, stamp: &str) -> String {
    let mut out = String::from(stamp);
    out.push_str(
        "quarter,code,in_degree,out_degree,in_strength,out_strength,betweenness,betweenness_norm,eigenvector,clustering\n",
    );
    for table in tables {
        for (i, f) in table.nodes.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                table.quarter,
                roster.code(i),
                f.in_degree,
                f.out_degree,
                fmt_f64(f.in_strength),
                fmt_f64(f.out_strength),
                fmt_f64(f.betweenness),
                fmt_f64(f.betweenness_norm),
                fmt_f64(f.eigenvector),
                fmt_f64(f.clustering),
            ));
        }
    }
    out
}

/// One row per quarter with the global topology indicators.
pub fn global_features_csv(tables: &[FeatureTable], stamp: &str) -> String {
    let mut out = String::from(stamp);
    out.push_str(
        "quarter,density,avg_path_length,reachable_fraction,mean_clustering,edge_count,eigenvector_converged\n",
    );
    for t in tables {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.quarter,
            fmt_f64(t.global.density),
            t.global.avg_path_length.map(fmt_f64).unwrap_or_default(),
            fmt_f64(t.global.reachable_fraction),
            fmt_f64(t.global.mean_clustering),
            t.global.edge_count,
            t.eigenvector_converged,
        ));
    }
    out
}

/// Dense adjacency dump, header row = roster codes.
pub fn matrix_csv(graph: &QuarterlyGraph, roster: &IndustryRoster, stamp: &str) -> String {
    let n = graph.n();
    let mut out = String::from(stamp);
    let codes: Vec<&str> = (0..n).map(|i| roster.code(i)).collect();
    out.push_str(&codes.join(","));
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = graph.adj().row(i).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_csv_filename(graph: &QuarterlyGraph) -> String {
    format!("matrix_{}Q{}.csv", graph.quarter.year(), graph.quarter.q())
}

/// Mean adjacency per calendar year, for yearly snapshot exports.
pub fn yearly_mean_graphs(graphs: &[QuarterlyGraph]) -> Vec<(i32, SquareMatrix)> {
    let mut by_year: BTreeMap<i32, Vec<&QuarterlyGraph>> = BTreeMap::new();
    for g in graphs {
        by_year.entry(g.quarter.year()).or_default().push(g);
    }
    by_year
        .into_iter()
        .map(|(year, gs)| {
            let n = gs[0].n();
            let mut mean = SquareMatrix::zeros(n);
            for g in &gs {
                for i in 0..n {
                    for j in 0..n {
                        mean.set(i, j, mean.at(i, j) + g.weight(i, j));
                    }
                }
            }
            let k = gs.len() as f64;
            for i in 0..n {
                for j in 0..n {
                    mean.set(i, j, mean.at(i, j) / k);
                }
            }
            (year, mean)
        })
        .collect()
}

/// Graphviz snapshot of one yearly mean graph: one node statement per
/// roster entry (filled with its category colour), one edge statement per
/// positive off-diagonal entry.
pub fn dot_snapshot(year: i32, adj: &SquareMatrix, roster: &IndustryRoster, stamp: &str) -> String {
    let n = adj.n();
    let mut out = String::new();
    out.push_str(&format!("// {}", &stamp[2..]));
    out.push_str(&format!("digraph payment_network_{year} {{\n"));
    out.push_str("  graph [overlap=false];\n  node [style=filled, shape=circle];\n");
    for i in 0..n {
        let e = roster.entry(i);
        let category = e.category.as_deref().unwrap_or("Other Services");
        out.push_str(&format!(
            "  \"{}\" [fillcolor=\"{}\", tooltip=\"{}\"];\n",
            e.code,
            category_color(category),
            category,
        ));
    }
    for i in 0..n {
        for j in 0..n {
            let w = adj.at(i, j);
            if i != j && w > 0.0 {
                out.push_str(&format!(
                    "  \"{}\" -> \"{}\" [weight=\"{:.2}\"];\n",
                    roster.code(i),
                    roster.code(j),
                    w,
                ));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Sidecar schema describing the persisted dataset.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetSchemaFile {
    pub config_hash: String,
    pub seed: u64,
    pub rows: usize,
    pub winsor_clip: f64,
    pub clamped_growth_observations: usize,
    pub dropped_missing_lag1: usize,
    pub dropped_missing_lag2: usize,
    pub columns: Vec<crate::dataset::ColumnDef>,
}

/// The canonical dataset CSV: key columns, every feature column, target.
pub fn dataset_csv(ds: &ForecastDataset, roster: &IndustryRoster, stamp: &str) -> String {
    let mut out = String::from(stamp);
    out.push_str("source,dest,quarter");
    for c in &ds.schema {
        out.push(',');
        out.push_str(&c.name);
    }
    out.push_str(",target\n");
    for (r, key) in ds.keys.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}",
            roster.code(key.source as usize),
            roster.code(key.dest as usize),
            ds.quarters[key.quarter_pos as usize],
        ));
        for col in &ds.columns {
            out.push(',');
            out.push_str(&fmt_f64(col[r]));
        }
        out.push(',');
        out.push_str(&fmt_f64(ds.targets[r]));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, FeatureOptions};
    use crate::quarter::Quarter;

    fn sample_graph() -> (QuarterlyGraph, IndustryRoster) {
        let mut m = SquareMatrix::zeros(3);
        m.set(0, 1, 10.0);
        m.set(1, 2, 5.0);
        m.set(2, 0, 2.5);
        let g = QuarterlyGraph::from_matrix(Quarter::new(2020, 2).unwrap(), m).unwrap();
        let roster = IndustryRoster::synthetic(3).unwrap();
        (g, roster)
    }

    #[test]
    fn dot_counts_match_graph() {
        let (g, roster) = sample_graph();
        let yearly = yearly_mean_graphs(&[g.clone()]);
        let dot = dot_snapshot(yearly[0].0, &yearly[0].1, &roster, &stamp("abc", 1));
        let nodes = dot.lines().filter(|l| l.contains("fillcolor")).count();
        let edges = dot.lines().filter(|l| l.contains("->")).count();
        assert_eq!(nodes, roster.len());
        assert_eq!(edges, g.edge_count());
        assert!(dot.starts_with("// paynet config_hash=abc seed=1"));
    }

    #[test]
    fn matrix_csv_shape() {
        let (g, roster) = sample_graph();
        let csv = matrix_csv(&g, &roster, &stamp("abc", 1));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 1 + 3);
        assert_eq!(lines[1], "01,02,03");
        assert_eq!(matrix_csv_filename(&g), "matrix_2020Q2.csv");
    }

    #[test]
    fn feature_csvs_have_expected_rows() {
        let (g, roster) = sample_graph();
        let table = extract_features(&g, &FeatureOptions::default());
        let nodes = node_features_csv(&[table.clone()], &roster, &stamp("h", 2));
        assert_eq!(nodes.lines().count(), 1 + 1 + 3);
        let globals = global_features_csv(&[table], &stamp("h", 2));
        assert_eq!(globals.lines().count(), 3);
        assert!(globals.lines().nth(2).unwrap().starts_with("2020Q2,"));
    }
}
