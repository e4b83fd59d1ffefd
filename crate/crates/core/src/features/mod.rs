//! Per-node centrality and clustering features plus global topology
//! indicators for a quarterly payment graph.

mod betweenness;
mod paths;

pub use betweenness::{betweenness_centrality, betweenness_centrality_seq, normalize_betweenness};
pub use paths::{average_path_length, average_path_length_seq};

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::graph::QuarterlyGraph;
use crate::numeric::stable_sum;
use crate::quarter::Quarter;

/// Structural features of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub in_degree: u32,
    pub out_degree: u32,
    /// Total incoming flow, GBP.
    pub in_strength: f64,
    /// Total outgoing flow, GBP.
    pub out_strength: f64,
    /// Raw pair-fraction betweenness.
    pub betweenness: f64,
    /// Betweenness divided by (n-1)(n-2), in [0, 1].
    pub betweenness_norm: f64,
    pub eigenvector: f64,
    pub clustering: f64,
}

/// Whole-graph topology indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFeatures {
    pub density: f64,
    /// Mean hop distance over reachable ordered pairs; `None` when nothing
    /// is reachable.
    pub avg_path_length: Option<f64>,
    pub reachable_fraction: f64,
    pub mean_clustering: f64,
    pub edge_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigDirection {
    /// Left eigenvector of the adjacency matrix: importance flows to nodes
    /// receiving payments from important nodes.
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureOptions {
    /// Use 1/w edge lengths for betweenness instead of hop counts.
    pub weighted_betweenness: bool,
    pub eigenvector: EigDirection,
}

/// All features for one quarter.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub quarter: Quarter,
    pub nodes: Vec<NodeFeatures>,
    pub global: GlobalFeatures,
    pub eigenvector_converged: bool,
}

/// (in_degree, out_degree) per node over the positive off-diagonal entries.
pub fn degree_centrality(graph: &QuarterlyGraph) -> Vec<(u32, u32)> {
    let n = graph.n();
    let mut degs = vec![(0u32, 0u32); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && graph.weight(i, j) > 0.0 {
                degs[i].1 += 1;
                degs[j].0 += 1;
            }
        }
    }
    degs
}

/// (in_strength, out_strength) per node: column and row sums of the weight
/// matrix, accumulated in value order so relabelling cannot shift the
/// result.
pub fn strength_centrality(graph: &QuarterlyGraph) -> Vec<(f64, f64)> {
    let n = graph.n();
    (0..n)
        .map(|i| {
            let mut incoming: Vec<f64> =
                (0..n).map(|j| graph.weight(j, i)).filter(|w| *w != 0.0).collect();
            let mut outgoing: Vec<f64> =
                (0..n).map(|j| graph.weight(i, j)).filter(|w| *w != 0.0).collect();
            (stable_sum(&mut incoming), stable_sum(&mut outgoing))
        })
        .collect()
}

const EIG_TOL: f64 = 1e-10;
const EIG_MAX_ITER: usize = 1000;

/// Dominant eigenvector of the weight matrix by power iteration,
/// unit-normalized each step. Returns the last iterate plus a convergence
/// flag; an empty graph yields the all-zero vector and `false`.
pub fn eigenvector_centrality(graph: &QuarterlyGraph, direction: EigDirection) -> (Vec<f64>, bool) {
    let n = graph.n();
    if n == 0 {
        return (Vec::new(), false);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..EIG_MAX_ITER {
        let mut y = vec![0.0f64; n];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut terms: Vec<f64> = (0..n)
                .map(|j| match direction {
                    EigDirection::Left => graph.weight(j, i) * x[j],
                    EigDirection::Right => graph.weight(i, j) * x[j],
                })
                .filter(|t| *t != 0.0)
                .collect();
            *yi = stable_sum(&mut terms);
        }
        let mut squares: Vec<f64> = y.iter().map(|v| v * v).filter(|v| *v != 0.0).collect();
        let norm = stable_sum(&mut squares).sqrt();
        if norm == 0.0 {
            return (vec![0.0; n], false);
        }
        for v in &mut y {
            *v /= norm;
        }
        let diff = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        x = y;
        if diff < EIG_TOL {
            return (x, true);
        }
    }
    (x, false)
}

/// Local clustering coefficient: realized directed edges among a node's
/// neighbourhood (union of in- and out-neighbours) over the |N|(|N|-1)
/// possible ones. A mutual pair among neighbours counts twice, once per
/// direction. Nodes with fewer than two neighbours score zero.
pub fn clustering_coefficient(graph: &QuarterlyGraph) -> Vec<f64> {
    let n = graph.n();
    exec::map_indexed(n, |i| {
        let neighbours: Vec<usize> = (0..n)
            .filter(|&j| j != i && (graph.weight(i, j) > 0.0 || graph.weight(j, i) > 0.0))
            .collect();
        let k = neighbours.len();
        if k < 2 {
            return 0.0;
        }
        let mut links = 0u64;
        for &j in &neighbours {
            for &l in &neighbours {
                if j != l && graph.weight(j, l) > 0.0 {
                    links += 1;
                }
            }
        }
        links as f64 / (k * (k - 1)) as f64
    })
}

/// Realized edges over the n(n-1) possible directed edges.
pub fn network_density(graph: &QuarterlyGraph) -> f64 {
    let n = graph.n();
    assert!(n >= 2, "density needs at least 2 nodes");
    graph.edge_count() as f64 / (n * (n - 1)) as f64
}

/// Computes every per-node and global feature in one pass.
pub fn extract_features(graph: &QuarterlyGraph, opts: &FeatureOptions) -> FeatureTable {
    let n = graph.n();
    let degrees = degree_centrality(graph);
    let strengths = strength_centrality(graph);
    let raw_betweenness = betweenness_centrality(graph, opts.weighted_betweenness);
    let betweenness_norm = normalize_betweenness(&raw_betweenness, n);
    let (eigenvector, eigenvector_converged) = eigenvector_centrality(graph, opts.eigenvector);
    let clustering = clustering_coefficient(graph);
    let (avg_path_length, reachable_fraction) = average_path_length(graph);

    let nodes = (0..n)
        .map(|i| NodeFeatures {
            in_degree: degrees[i].0,
            out_degree: degrees[i].1,
            in_strength: strengths[i].0,
            out_strength: strengths[i].1,
            betweenness: raw_betweenness[i],
            betweenness_norm: betweenness_norm[i],
            eigenvector: eigenvector[i],
            clustering: clustering[i],
        })
        .collect();

    let mut clustering_values: Vec<f64> = clustering.iter().copied().filter(|c| *c != 0.0).collect();
    let mean_clustering = if n == 0 { 0.0 } else { stable_sum(&mut clustering_values) / n as f64 };

    FeatureTable {
        quarter: graph.quarter,
        nodes,
        global: GlobalFeatures {
            density: network_density(graph),
            avg_path_length,
            reachable_fraction,
            mean_clustering,
            edge_count: graph.edge_count(),
        },
        eigenvector_converged,
    }
}

/// Feature extraction across quarters; quarters are independent jobs.
pub fn extract_features_batch(graphs: &[QuarterlyGraph], opts: &FeatureOptions) -> Vec<FeatureTable> {
    exec::map_indexed(graphs.len(), |i| extract_features(&graphs[i], opts))
}

/// Sequential variant of [`extract_features_batch`].
pub fn extract_features_batch_seq(
    graphs: &[QuarterlyGraph],
    opts: &FeatureOptions,
) -> Vec<FeatureTable> {
    exec::map_indexed_seq(graphs.len(), |i| extract_features(&graphs[i], opts))
}
