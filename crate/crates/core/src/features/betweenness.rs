//! Betweenness centrality via Brandes' dependency accumulation.
//!
//! Per-source searches are independent and run on the crate's execution
//! driver. Dependency sums and the final per-node reduction over sources go
//! through [`stable_sum`], so scores are bit-identical under node
//! relabelling and across thread counts.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::exec;
use crate::graph::QuarterlyGraph;
use crate::numeric::stable_sum;

/// Raw betweenness scores (pair-fraction sums, no normalization).
///
/// Unreachable pairs contribute zero. In unweighted mode (the default
/// feature pipeline) geodesics are hop-count shortest paths over the
/// positive-entry edge set; in weighted mode edges have length 1/w, so
/// larger flows mean shorter economic distance.
pub fn betweenness_centrality(graph: &QuarterlyGraph, weighted: bool) -> Vec<f64> {
    betweenness_with(graph, weighted, false)
}

/// Sequential variant of [`betweenness_centrality`]; this is also what the
/// default entry point degrades to when the `parallel` feature is off.
pub fn betweenness_centrality_seq(graph: &QuarterlyGraph, weighted: bool) -> Vec<f64> {
    betweenness_with(graph, weighted, true)
}

fn betweenness_with(graph: &QuarterlyGraph, weighted: bool, sequential: bool) -> Vec<f64> {
    let n = graph.n();
    if n <= 2 {
        return vec![0.0; n];
    }
    let out = graph.out_neighbors();
    let per_source = |s: usize| {
        if weighted {
            source_dependencies_weighted(graph, &out, s)
        } else {
            source_dependencies_unweighted(&out, s)
        }
    };
    let deltas = if sequential {
        exec::map_indexed_seq(n, &per_source)
    } else {
        exec::map_indexed(n, &per_source)
    };
    // Canonical reduction: per node, sum the per-source dependencies in
    // value order rather than source order.
    (0..n)
        .map(|v| {
            let mut contributions: Vec<f64> =
                deltas.iter().map(|d| d[v]).filter(|x| *x != 0.0).collect();
            stable_sum(&mut contributions)
        })
        .collect()
}

/// Divides raw scores by (n-1)(n-2), the number of ordered source/dest
/// pairs a node can sit between, mapping them into [0, 1].
pub fn normalize_betweenness(raw: &[f64], n: usize) -> Vec<f64> {
    if n < 3 {
        return vec![0.0; raw.len()];
    }
    let denom = ((n - 1) * (n - 2)) as f64;
    raw.iter().map(|v| v / denom).collect()
}

/// One-source BFS phase of Brandes' algorithm, returning the dependency of
/// every node on paths out of `s`.
fn source_dependencies_unweighted(out: &[Vec<u32>], s: usize) -> Vec<f64> {
    let n = out.len();
    let mut stack: Vec<u32> = Vec::with_capacity(n);
    let mut pred: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist: Vec<i64> = vec![-1; n];

    sigma[s] = 1.0;
    dist[s] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(s as u32);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        let dv = dist[v as usize];
        for &w in &out[v as usize] {
            let wi = w as usize;
            if dist[wi] < 0 {
                dist[wi] = dv + 1;
                queue.push_back(w);
            }
            if dist[wi] == dv + 1 {
                sigma[wi] += sigma[v as usize];
                pred[wi].push(v);
            }
        }
    }
    accumulate(&stack, &pred, &sigma, s)
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap; node index breaks distance ties.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra phase for weighted mode; path multiplicity uses exact distance
/// equality, matching the usual convention for weighted path counting.
fn source_dependencies_weighted(graph: &QuarterlyGraph, out: &[Vec<u32>], s: usize) -> Vec<f64> {
    let n = out.len();
    let mut stack: Vec<u32> = Vec::with_capacity(n);
    let mut pred: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];

    sigma[s] = 1.0;
    dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, node: s as u32 });
    while let Some(HeapEntry { dist: d, node: v }) = heap.pop() {
        let vi = v as usize;
        if settled[vi] {
            continue;
        }
        settled[vi] = true;
        stack.push(v);
        for &w in &out[vi] {
            let wi = w as usize;
            let length = 1.0 / graph.weight(vi, wi);
            let nd = d + length;
            if nd < dist[wi] {
                dist[wi] = nd;
                sigma[wi] = sigma[vi];
                pred[wi].clear();
                pred[wi].push(v);
                heap.push(HeapEntry { dist: nd, node: w });
            } else if nd == dist[wi] && !settled[wi] {
                sigma[wi] += sigma[vi];
                pred[wi].push(v);
            }
        }
    }
    accumulate(&stack, &pred, &sigma, s)
}

/// Back-propagates dependencies in reverse settle order. Each node's
/// incoming contributions are finalized with a value-ordered sum, so the
/// result does not depend on the order predecessors were discovered in.
fn accumulate(stack: &[u32], pred: &[Vec<u32>], sigma: &[f64], s: usize) -> Vec<f64> {
    let n = pred.len();
    let mut contrib: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut delta = vec![0.0f64; n];
    for &w in stack.iter().rev() {
        let wi = w as usize;
        let dw = stable_sum(&mut contrib[wi]);
        if wi != s {
            delta[wi] = dw;
        }
        let share = 1.0 + dw;
        for &v in &pred[wi] {
            let vi = v as usize;
            if sigma[wi] > 0.0 {
                contrib[vi].push(sigma[vi] / sigma[wi] * share);
            }
        }
    }
    delta
}
