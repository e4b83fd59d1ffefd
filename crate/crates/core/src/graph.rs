//! Quarterly directed weighted graphs and their matrix forms.
//!
//! The graph is stored as a dense row-major adjacency matrix: with n = 89
//! sectors and observed densities around 0.7 a sparse representation buys
//! nothing, and dense rows keep the two-hop product cache-friendly.

use crate::error::{Error, Result};
use crate::exec;
use crate::ingest::PairTotals;
use crate::quarter::Quarter;
use crate::roster::IndustryRoster;

/// Dense row-major n-by-n matrix of nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = SquareMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} length != {n}");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&self, c: f64) -> SquareMatrix {
        SquareMatrix { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// Applies a node relabelling: `out[p[i]][p[j]] = self[i][j]`.
    pub fn permute(&self, perm: &[usize]) -> SquareMatrix {
        assert_eq!(perm.len(), self.n);
        let mut out = SquareMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(perm[i], perm[j], self.at(i, j));
            }
        }
        out
    }

    /// Matrix product self * self, rows computed independently.
    fn squared(&self) -> SquareMatrix {
        let n = self.n;
        let rows = exec::map_indexed(n, |i| {
            let mut row = vec![0.0; n];
            for k in 0..n {
                let aik = self.at(i, k);
                if aik == 0.0 {
                    continue;
                }
                let rk = self.row(k);
                for (j, out) in row.iter_mut().enumerate() {
                    *out += aik * rk[j];
                }
            }
            row
        });
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            data.extend_from_slice(&row);
        }
        SquareMatrix { n, data }
    }
}

/// One quarter's directed weighted payment graph.
#[derive(Debug, Clone)]
pub struct QuarterlyGraph {
    pub quarter: Quarter,
    adj: SquareMatrix,
}

impl QuarterlyGraph {
    /// Builds the graph directly from a weight matrix; entries must be
    /// nonnegative and finite.
    pub fn from_matrix(quarter: Quarter, adj: SquareMatrix) -> Result<Self> {
        if adj.data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::data("adjacency entries must be finite and nonnegative"));
        }
        Ok(QuarterlyGraph { quarter, adj })
    }

    pub fn n(&self) -> usize {
        self.adj.n
    }

    pub fn adj(&self) -> &SquareMatrix {
        &self.adj
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj.at(i, j)
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adj.at(i, j) > 0.0
    }

    /// Number of strictly positive off-diagonal entries.
    pub fn edge_count(&self) -> usize {
        let n = self.adj.n;
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.adj.at(i, j) > 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Out-neighbour lists over the positive off-diagonal entries.
    pub fn out_neighbors(&self) -> Vec<Vec<u32>> {
        let n = self.adj.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && self.adj.at(i, j) > 0.0)
                    .map(|j| j as u32)
                    .collect()
            })
            .collect()
    }

    /// In-neighbour lists over the positive off-diagonal entries.
    pub fn in_neighbors(&self) -> Vec<Vec<u32>> {
        let n = self.adj.n;
        (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&i| i != j && self.adj.at(i, j) > 0.0)
                    .map(|i| i as u32)
                    .collect()
            })
            .collect()
    }
}

/// Row-proportional form of a quarterly graph: each positive row of the
/// adjacency matrix rescaled to sum to one.
#[derive(Debug, Clone)]
pub struct NormalizedGraph {
    pub quarter: Quarter,
    nadj: SquareMatrix,
}

impl NormalizedGraph {
    pub fn n(&self) -> usize {
        self.nadj.n
    }

    pub fn nadj(&self) -> &SquareMatrix {
        &self.nadj
    }
}

/// Assembles the dense weight matrix from one quarter's pair totals.
pub fn build_graph(totals: &PairTotals, roster: &IndustryRoster) -> Result<QuarterlyGraph> {
    let n = roster.len();
    let mut adj = SquareMatrix::zeros(n);
    for (&(i, j), &pence) in totals.totals() {
        let (i, j) = (i as usize, j as usize);
        if i >= n || j >= n {
            return Err(Error::data(format!(
                "pair ({i},{j}) outside roster of {n} industries"
            )));
        }
        adj.set(i, j, pence_to_gbp(pence));
    }
    QuarterlyGraph::from_matrix(totals.quarter, adj)
}

pub fn pence_to_gbp(pence: u64) -> f64 {
    pence as f64 / 100.0
}

/// Converts absolute weights into row proportions. Rows that have no
/// outgoing flow stay all-zero instead of dividing zero by zero.
pub fn row_normalize(graph: &QuarterlyGraph) -> NormalizedGraph {
    let n = graph.n();
    let mut nadj = SquareMatrix::zeros(n);
    for i in 0..n {
        let row = graph.adj.row(i);
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for j in 0..n {
                nadj.set(i, j, row[j] / sum);
            }
        }
    }
    NormalizedGraph { quarter: graph.quarter, nadj }
}

/// Two-step connectivity matrix: the square of the raw adjacency matrix, or
/// of the row-normalized one. Entry (i, j) aggregates all two-step payment
/// paths from i to j.
pub fn two_hop(graph: &QuarterlyGraph, normalized: bool) -> SquareMatrix {
    if normalized {
        row_normalize(graph).nadj.squared()
    } else {
        graph.adj.squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PairTotals;

    fn q() -> Quarter {
        Quarter::new(2020, 1).unwrap()
    }

    fn graph_from(rows: &[Vec<f64>]) -> QuarterlyGraph {
        QuarterlyGraph::from_matrix(q(), SquareMatrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn build_places_totals() {
        let roster = IndustryRoster::from_codes(vec!["A".into(), "B".into()]).unwrap();
        let mut totals = PairTotals::new(q());
        totals.add(0, 1, 100_00);
        let g = build_graph(&totals, &roster).unwrap();
        assert_eq!(g.weight(0, 1), 100.0);
        assert_eq!(g.weight(1, 0), 0.0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn empty_totals_give_zero_matrix() {
        let roster = IndustryRoster::from_codes(vec!["A".into(), "B".into()]).unwrap();
        let g = build_graph(&PairTotals::new(q()), &roster).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(g.adj().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_roster_index_is_fatal() {
        let roster = IndustryRoster::from_codes(vec!["A".into(), "B".into()]).unwrap();
        let mut totals = PairTotals::new(q());
        totals.add(0, 5, 100);
        assert!(build_graph(&totals, &roster).is_err());
    }

    #[test]
    fn normalize_rows() {
        let g = graph_from(&[vec![0.0, 2.0, 3.0], vec![0.0, 0.0, 0.0], vec![5.0, 0.0, 0.0]]);
        let ng = row_normalize(&g);
        assert_eq!(ng.nadj().row(0), &[0.0, 0.4, 0.6]);
        assert_eq!(ng.nadj().row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(ng.nadj().row(2), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_simple_proportions() {
        let g = graph_from(&[vec![0.0, 7.0], vec![0.0, 0.0]]);
        let ng = row_normalize(&g);
        assert_eq!(ng.nadj().row(0), &[0.0, 1.0]);
    }

    #[test]
    fn two_hop_on_two_cycle() {
        let g = graph_from(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let b = two_hop(&g, false);
        assert_eq!(b.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn two_hop_single_path() {
        let g = graph_from(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ]);
        let b = two_hop(&g, false);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if (i, j) == (0, 2) { 1.0 } else { 0.0 };
                assert_eq!(b.at(i, j), expect);
            }
        }
    }

    #[test]
    fn normalization_is_scale_invariant() {
        let g = graph_from(&[vec![0.0, 2.0, 6.0], vec![1.0, 0.0, 0.0], vec![0.0, 4.0, 0.0]]);
        let scaled =
            QuarterlyGraph::from_matrix(q(), g.adj().scale(3.0)).unwrap();
        let a = row_normalize(&g);
        let b = row_normalize(&scaled);
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.nadj().at(i, j) - b.nadj().at(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalize_is_idempotent_without_zero_rows() {
        let g = graph_from(&[vec![0.0, 2.0, 6.0], vec![1.0, 0.0, 1.0], vec![0.5, 4.0, 0.0]]);
        let once = row_normalize(&g);
        let again = row_normalize(
            &QuarterlyGraph::from_matrix(q(), once.nadj().clone()).unwrap(),
        );
        for i in 0..3 {
            for j in 0..3 {
                assert!((once.nadj().at(i, j) - again.nadj().at(i, j)).abs() < 1e-12);
            }
        }
    }
}
