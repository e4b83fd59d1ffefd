//! CART regression trees with histogram split search.
//!
//! Features are discretized once per training set into at most `max_bins`
//! quantile bins; split gains are scanned over bin boundaries, with
//! thresholds stored back in raw value space for prediction. Categorical
//! features are grouped by per-node target mean (the classic optimal
//! ordering for squared error) and split as an ordered scan.
//!
//! Determinism rules:
//! - ties in split gain go to the lowest feature index, then the lowest
//!   threshold (features and thresholds are scanned in ascending order and
//!   a candidate must strictly beat the incumbent);
//! - node rows are kept in target-sorted order, so per-bin float
//!   accumulation does not depend on the order training rows arrived in;
//! - the node worklist is processed breadth-first, so the RNG stream for
//!   feature subsampling is consumed in a fixed order.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum split depth; `None` grows until leaves are pure or small.
    pub max_depth: Option<u32>,
    /// Minimum rows on each side of a split.
    pub min_leaf: usize,
    /// Fraction of features considered per split, in (0, 1].
    pub feature_subsample: f64,
    /// Histogram resolution for numeric features.
    pub max_bins: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: Some(8), min_leaf: 20, feature_subsample: 1.0, max_bins: 255 }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::config("min_leaf must be >= 1".to_string()));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::config(format!(
                "feature_subsample {} outside (0, 1]",
                self.feature_subsample
            )));
        }
        if self.max_bins < 2 {
            return Err(Error::config("max_bins must be >= 2".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Go left when value <= threshold.
    Threshold(f64),
    /// Go left when the category code is in the (sorted) set.
    Categories(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split { feature: u32, rule: SplitRule, left: u32, right: u32 },
    Leaf { value: f64 },
}

/// A fitted regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, columns: &[(&crate::dataset::ColumnDef, &[f64])], row: usize) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, rule, left, right } => {
                    let v = columns[*feature as usize].1[row];
                    let go_left = match rule {
                        SplitRule::Threshold(t) => v <= *t,
                        SplitRule::Categories(set) => set.binary_search(&(v as u32)).is_ok(),
                    };
                    at = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> u32 {
        fn walk(nodes: &[TreeNode], at: usize) -> u32 {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// One feature discretized for training.
pub(crate) enum BinnedColumn {
    Numeric {
        /// Ascending candidate thresholds; bin code of a value is the
        /// number of thresholds strictly below it.
        thresholds: Vec<f64>,
        codes: Vec<u16>,
    },
    Categorical {
        cardinality: usize,
        codes: Vec<u16>,
    },
}

impl BinnedColumn {
    fn n_bins(&self) -> usize {
        match self {
            BinnedColumn::Numeric { thresholds, .. } => thresholds.len() + 1,
            BinnedColumn::Categorical { cardinality, .. } => *cardinality,
        }
    }

    fn codes(&self) -> &[u16] {
        match self {
            BinnedColumn::Numeric { codes, .. } => codes,
            BinnedColumn::Categorical { codes, .. } => codes,
        }
    }
}

pub(crate) fn bin_columns(data: &FeatureMatrix, max_bins: usize) -> Result<Vec<BinnedColumn>> {
    data.columns
        .iter()
        .map(|(def, values)| match def.kind {
            FeatureKind::Numeric => Ok(bin_numeric(values, max_bins)),
            FeatureKind::Categorical { cardinality } => {
                let mut codes = Vec::with_capacity(values.len());
                for &v in *values {
                    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v >= cardinality as f64 {
                        return Err(Error::data(format!(
                            "categorical column `{}` has invalid code {v}",
                            def.name
                        )));
                    }
                    codes.push(v as u16);
                }
                Ok(BinnedColumn::Categorical { cardinality: cardinality as usize, codes })
            }
        })
        .collect()
}

fn bin_numeric(values: &[f64], max_bins: usize) -> BinnedColumn {
    let mut unique: Vec<f64> = values.to_vec();
    unique.sort_unstable_by(f64::total_cmp);
    unique.dedup();

    let mut thresholds: Vec<f64> = if unique.len() <= max_bins {
        unique.windows(2).map(|w| midpoint(w[0], w[1])).collect()
    } else {
        // Quantile cuts: boundaries at evenly spaced ranks of the uniques.
        (1..max_bins)
            .map(|b| {
                let pos = b * unique.len() / max_bins;
                midpoint(unique[pos - 1], unique[pos])
            })
            .collect()
    };
    thresholds.dedup();

    let codes = values
        .iter()
        .map(|v| thresholds.partition_point(|t| t < v) as u16)
        .collect();
    BinnedColumn::Numeric { thresholds, codes }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a && m <= b {
        m
    } else {
        b
    }
}

struct BestSplit {
    score: f64,
    feature: u32,
    go_left: GoLeft,
}

enum GoLeft {
    CodeAtMost(u16, f64), // bin code bound plus the raw-space threshold
    Categories(Vec<u16>),
}

struct Task {
    slot: usize,
    rows: Vec<u32>,
    depth: u32,
}

/// Fits a tree over pre-binned columns on the given rows (bootstrap
/// multiset or the full index range).
pub(crate) fn fit_tree_binned(
    binned: &[BinnedColumn],
    targets: &[f64],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
    mut rows: Vec<u32>,
) -> Tree {
    // Canonical processing order: by target value, then row index. Bin
    // accumulators then see the same operand sequence whatever order the
    // caller supplied rows in.
    rows.sort_unstable_by(|&a, &b| {
        targets[a as usize]
            .total_cmp(&targets[b as usize])
            .then(a.cmp(&b))
    });

    let n_features = binned.len();
    let k_features = ((params.feature_subsample * n_features as f64).ceil() as usize)
        .clamp(1, n_features);

    let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { value: 0.0 }];
    let mut queue = VecDeque::new();
    queue.push_back(Task { slot: 0, rows, depth: 0 });

    while let Some(task) = queue.pop_front() {
        let count = task.rows.len();
        let sum: f64 = task.rows.iter().map(|&r| targets[r as usize]).sum();
        let mean = sum / count as f64;

        let depth_ok = params.max_depth.map_or(true, |d| task.depth < d);
        if !depth_ok || count < 2 * params.min_leaf {
            nodes[task.slot] = TreeNode::Leaf { value: mean };
            continue;
        }

        let features = pick_features(n_features, k_features, rng);
        let parent_score = sum * sum / count as f64;
        let epsilon = 1e-12 * (1.0 + parent_score.abs());
        let mut best: Option<BestSplit> = None;
        let mut best_score = parent_score + epsilon;

        for f in features {
            let col = &binned[f];
            match col {
                BinnedColumn::Numeric { thresholds, codes } => {
                    let n_bins = col.n_bins();
                    if n_bins < 2 {
                        continue;
                    }
                    let mut hist = vec![(0u32, 0.0f64); n_bins];
                    for &r in &task.rows {
                        let c = codes[r as usize] as usize;
                        hist[c].0 += 1;
                        hist[c].1 += targets[r as usize];
                    }
                    let mut lc = 0u32;
                    let mut ls = 0.0f64;
                    for b in 0..n_bins - 1 {
                        lc += hist[b].0;
                        ls += hist[b].1;
                        let rc = count as u32 - lc;
                        if (lc as usize) < params.min_leaf || (rc as usize) < params.min_leaf {
                            continue;
                        }
                        let rs = sum - ls;
                        let score = ls * ls / lc as f64 + rs * rs / rc as f64;
                        if score > best_score {
                            best_score = score;
                            best = Some(BestSplit {
                                score,
                                feature: f as u32,
                                go_left: GoLeft::CodeAtMost(b as u16, thresholds[b]),
                            });
                        }
                    }
                }
                BinnedColumn::Categorical { cardinality, codes } => {
                    let mut stats = vec![(0u32, 0.0f64); *cardinality];
                    for &r in &task.rows {
                        let c = codes[r as usize] as usize;
                        stats[c].0 += 1;
                        stats[c].1 += targets[r as usize];
                    }
                    let mut present: Vec<u16> = (0..*cardinality as u16)
                        .filter(|&c| stats[c as usize].0 > 0)
                        .collect();
                    if present.len() < 2 {
                        continue;
                    }
                    present.sort_by(|&a, &b| {
                        let ma = stats[a as usize].1 / stats[a as usize].0 as f64;
                        let mb = stats[b as usize].1 / stats[b as usize].0 as f64;
                        ma.total_cmp(&mb).then(a.cmp(&b))
                    });
                    let mut lc = 0u32;
                    let mut ls = 0.0f64;
                    for k in 0..present.len() - 1 {
                        let c = present[k] as usize;
                        lc += stats[c].0;
                        ls += stats[c].1;
                        let rc = count as u32 - lc;
                        if (lc as usize) < params.min_leaf || (rc as usize) < params.min_leaf {
                            continue;
                        }
                        let rs = sum - ls;
                        let score = ls * ls / lc as f64 + rs * rs / rc as f64;
                        if score > best_score {
                            best_score = score;
                            let mut left: Vec<u16> = present[..=k].to_vec();
                            left.sort_unstable();
                            best = Some(BestSplit {
                                score,
                                feature: f as u32,
                                go_left: GoLeft::Categories(left),
                            });
                        }
                    }
                }
            }
        }

        let Some(split) = best else {
            nodes[task.slot] = TreeNode::Leaf { value: mean };
            continue;
        };
        debug_assert!(split.score > parent_score);

        let codes = binned[split.feature as usize].codes();
        let goes_left = |r: u32| -> bool {
            let c = codes[r as usize];
            match &split.go_left {
                GoLeft::CodeAtMost(bound, _) => c <= *bound,
                GoLeft::Categories(set) => set.binary_search(&c).is_ok(),
            }
        };
        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &r in &task.rows {
            if goes_left(r) {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }

        let left_slot = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        let right_slot = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes[task.slot] = TreeNode::Split {
            feature: split.feature,
            rule: match split.go_left {
                GoLeft::CodeAtMost(_, threshold) => SplitRule::Threshold(threshold),
                GoLeft::Categories(set) => {
                    SplitRule::Categories(set.into_iter().map(u32::from).collect())
                }
            },
            left: left_slot as u32,
            right: right_slot as u32,
        };
        queue.push_back(Task { slot: left_slot, rows: left_rows, depth: task.depth + 1 });
        queue.push_back(Task { slot: right_slot, rows: right_rows, depth: task.depth + 1 });
    }

    Tree { nodes }
}

fn pick_features(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    // Partial Fisher-Yates, then ascending order so the gain scan always
    // visits features lowest-index first.
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}
