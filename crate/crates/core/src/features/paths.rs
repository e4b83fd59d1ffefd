//! All-pairs hop distances: average path length and reachability.

use std::collections::VecDeque;

use crate::exec;
use crate::graph::QuarterlyGraph;

/// Mean hop-count shortest-path length over ordered pairs (i, j), i != j,
/// where j is reachable from i, together with the fraction of ordered pairs
/// that are reachable. Returns `None` for the mean when no pair is
/// reachable.
pub fn average_path_length(graph: &QuarterlyGraph) -> (Option<f64>, f64) {
    apl_with(graph, false)
}

/// Sequential variant of [`average_path_length`].
pub fn average_path_length_seq(graph: &QuarterlyGraph) -> (Option<f64>, f64) {
    apl_with(graph, true)
}

fn apl_with(graph: &QuarterlyGraph, sequential: bool) -> (Option<f64>, f64) {
    let n = graph.n();
    if n < 2 {
        return (None, 0.0);
    }
    let out = graph.out_neighbors();
    let per_source_fn = |s: usize| bfs_sums(&out, s);
    // Distance sums are integers, so the reduction order cannot matter.
    let per_source = if sequential {
        exec::map_indexed_seq(n, &per_source_fn)
    } else {
        exec::map_indexed(n, &per_source_fn)
    };
    let mut total_dist = 0u64;
    let mut reachable = 0u64;
    for (d, c) in per_source {
        total_dist += d;
        reachable += c;
    }
    let possible = (n * (n - 1)) as u64;
    let fraction = reachable as f64 / possible as f64;
    if reachable == 0 {
        (None, 0.0)
    } else {
        (Some(total_dist as f64 / reachable as f64), fraction)
    }
}

fn bfs_sums(out: &[Vec<u32>], s: usize) -> (u64, u64) {
    let n = out.len();
    let mut dist: Vec<i64> = vec![-1; n];
    dist[s] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(s as u32);
    let mut sum = 0u64;
    let mut count = 0u64;
    while let Some(v) = queue.pop_front() {
        let dv = dist[v as usize];
        for &w in &out[v as usize] {
            if dist[w as usize] < 0 {
                dist[w as usize] = dv + 1;
                sum += (dv + 1) as u64;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    (sum, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SquareMatrix;
    use crate::quarter::Quarter;

    fn graph(rows: &[Vec<f64>]) -> QuarterlyGraph {
        QuarterlyGraph::from_matrix(Quarter::new(2020, 1).unwrap(), SquareMatrix::from_rows(rows))
            .unwrap()
    }

    #[test]
    fn complete_digraph() {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let (apl, frac) = average_path_length(&graph(&rows));
        assert_eq!(apl, Some(1.0));
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn directed_path() {
        let g = graph(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ]);
        let (apl, frac) = average_path_length(&g);
        // reachable pairs: 0->1 (1), 1->2 (1), 0->2 (2)
        assert_eq!(apl, Some(4.0 / 3.0));
        assert_eq!(frac, 0.5);
    }

    #[test]
    fn empty_graph_is_undefined() {
        let g = graph(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let (apl, frac) = average_path_length(&g);
        assert_eq!(apl, None);
        assert_eq!(frac, 0.0);
    }
}
