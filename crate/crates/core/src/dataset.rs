//! Supervised-learning dataset construction: growth-rate targets, the
//! three feature specifications, and leakage-free expanding windows.
//!
//! All three specifications are materialized as column subsets of one
//! canonical row table, so they share identical (pair, quarter) keys and
//! targets by construction — the pairing the forecast-comparison test
//! needs. Every network feature is dated one quarter before the target;
//! rows are sorted by (quarter, source, dest) so output is reproducible
//! regardless of assembly order.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::SquareMatrix;
use crate::ingest::PairTotals;
use crate::quarter::Quarter;
use crate::roster::IndustryRoster;

/// Quarter-on-quarter proportional change of one pair flow, defined only
/// when the pair is positive in both quarters.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthObservation {
    pub source: u32,
    pub dest: u32,
    pub quarter: Quarter,
    pub growth: f64,
}

#[derive(Debug, Clone)]
pub struct GrowthSet {
    pub observations: Vec<GrowthObservation>,
    /// Winsorization bound applied symmetrically; growth is clamped to
    /// [-clip, clip].
    pub clip: f64,
    /// How many observations the clamp actually touched.
    pub clamped: usize,
}

/// Computes growth rates from a contiguous, ordered quarterly sequence of
/// pair totals. Pairs absent in either quarter emit no observation.
pub fn growth_rates(totals: &[PairTotals], clip: f64) -> Result<GrowthSet> {
    if !(clip > 0.0) {
        return Err(Error::config(format!("winsorization clip must be positive, got {clip}")));
    }
    for pair in totals.windows(2) {
        if pair[0].quarter.next() != pair[1].quarter {
            return Err(Error::data(format!(
                "quarter sequence not contiguous: {} then {}",
                pair[0].quarter, pair[1].quarter
            )));
        }
    }
    let mut observations = Vec::new();
    let mut clamped = 0usize;
    for pair in totals.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        for (&(i, j), &w_now) in cur.totals() {
            if let Some(w_prev) = prev.get(i, j) {
                let raw = (w_now as f64 - w_prev as f64) / w_prev as f64;
                let growth = raw.clamp(-clip, clip);
                if growth != raw {
                    clamped += 1;
                }
                observations.push(GrowthObservation {
                    source: i,
                    dest: j,
                    quarter: cur.quarter,
                    growth,
                });
            }
        }
    }
    Ok(GrowthSet { observations, clip, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureBlock {
    Traditional,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical { cardinality: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub block: FeatureBlock,
    pub kind: FeatureKind,
}

/// The three model specifications compared by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    Traditional,
    Network,
    Combined,
}

impl SpecKind {
    pub const ALL: [SpecKind; 3] = [SpecKind::Traditional, SpecKind::Network, SpecKind::Combined];

    pub fn label(&self) -> &'static str {
        match self {
            SpecKind::Traditional => "Traditional Features Only",
            SpecKind::Network => "Network Features Only",
            SpecKind::Combined => "Combined (Network + Traditional)",
        }
    }

    pub fn includes(&self, block: FeatureBlock) -> bool {
        match self {
            SpecKind::Traditional => block == FeatureBlock::Traditional,
            SpecKind::Network => block == FeatureBlock::Network,
            SpecKind::Combined => true,
        }
    }
}

/// Row identity: pair plus the position of the target quarter on the
/// sample's quarter axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RowKey {
    pub quarter_pos: u32,
    pub source: u32,
    pub dest: u32,
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    /// Drop rows whose second growth lag is unavailable (default). When
    /// false such rows stay, with the lag imputed to zero and flagged in a
    /// dedicated indicator column.
    pub require_lag2: bool,
    /// Encode industry fixed effects as one-hot columns instead of
    /// categorical indices.
    pub industry_one_hot: bool,
    /// Optional subset of network-block column names to keep.
    pub network_features: Option<Vec<String>>,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions { require_lag2: true, industry_one_hot: false, network_features: None }
    }
}

/// The canonical row table: every column of both blocks, one row per
/// (pair, target quarter) that satisfies the lag requirements.
#[derive(Debug, Clone)]
pub struct ForecastDataset {
    pub quarters: Vec<Quarter>,
    pub schema: Vec<ColumnDef>,
    pub keys: Vec<RowKey>,
    /// Column-major feature values, aligned with `schema`.
    pub columns: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub dropped_missing_lag1: usize,
    pub dropped_missing_lag2: usize,
}

/// Borrowed column view handed to the models.
#[derive(Debug, Clone)]
pub struct FeatureMatrix<'a> {
    pub columns: Vec<(&'a ColumnDef, &'a [f64])>,
    pub schema_hash: String,
    pub n_rows: usize,
}

impl ForecastDataset {
    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    /// Column subset for a specification over a row range. Rows are sorted
    /// by quarter position, so expanding-window train/test sets are always
    /// contiguous ranges.
    pub fn view(&self, spec: SpecKind, rows: Range<usize>) -> FeatureMatrix<'_> {
        let columns: Vec<(&ColumnDef, &[f64])> = self
            .schema
            .iter()
            .zip(&self.columns)
            .filter(|(def, _)| spec.includes(def.block))
            .map(|(def, col)| (def, &col[rows.clone()]))
            .collect();
        let schema_hash = schema_hash(columns.iter().map(|(d, _)| *d));
        FeatureMatrix { columns, schema_hash, n_rows: rows.len() }
    }

    pub fn targets_for(&self, rows: Range<usize>) -> &[f64] {
        &self.targets[rows]
    }

    /// Number of leading rows whose target quarter position is < `pos`.
    pub fn rows_before_quarter(&self, pos: u32) -> usize {
        self.keys.partition_point(|k| k.quarter_pos < pos)
    }

    /// Contiguous row range whose target quarter position equals `pos`.
    pub fn rows_of_quarter(&self, pos: u32) -> Range<usize> {
        self.rows_before_quarter(pos)..self.rows_before_quarter(pos + 1)
    }
}

pub fn schema_hash<'a>(defs: impl Iterator<Item = &'a ColumnDef>) -> String {
    let mut hasher = Sha256::new();
    for def in defs {
        hasher.update(def.name.as_bytes());
        match def.kind {
            FeatureKind::Numeric => hasher.update(b"|num;"),
            FeatureKind::Categorical { cardinality } => {
                hasher.update(b"|cat:");
                hasher.update(cardinality.to_le_bytes());
                hasher.update(b";");
            }
        }
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

const NETWORK_COLUMNS: [&str; 17] = [
    "src_in_degree",
    "src_out_degree",
    "src_in_strength_log1p",
    "src_out_strength_log1p",
    "src_betweenness_norm",
    "src_eigenvector",
    "src_clustering",
    "dst_in_degree",
    "dst_out_degree",
    "dst_in_strength_log1p",
    "dst_out_strength_log1p",
    "dst_betweenness_norm",
    "dst_eigenvector",
    "dst_clustering",
    "two_hop",
    "density",
    "avg_path_length",
];

/// Joins growth targets with lagged growth and previous-quarter network
/// features into the canonical dataset.
pub fn assemble(
    quarters: &[Quarter],
    features: &[FeatureTable],
    two_hop: &[SquareMatrix],
    growth: &GrowthSet,
    roster: &IndustryRoster,
    opts: &AssembleOptions,
) -> Result<ForecastDataset> {
    if quarters.len() != features.len() || quarters.len() != two_hop.len() {
        return Err(Error::internal(format!(
            "misaligned inputs: {} quarters, {} feature tables, {} two-hop matrices",
            quarters.len(),
            features.len(),
            two_hop.len()
        )));
    }
    let n = roster.len() as u32;

    // Schema: traditional block first, then the (possibly pruned) network
    // block. Column order is part of the schema hash.
    let mut schema: Vec<ColumnDef> = Vec::new();
    let numeric = |name: &str, block| ColumnDef {
        name: name.to_string(),
        block,
        kind: FeatureKind::Numeric,
    };
    schema.push(numeric("lag1_growth", FeatureBlock::Traditional));
    schema.push(numeric("lag2_growth", FeatureBlock::Traditional));
    if !opts.require_lag2 {
        schema.push(numeric("lag2_missing", FeatureBlock::Traditional));
    }
    for q in 1..=4 {
        schema.push(numeric(&format!("q{q}"), FeatureBlock::Traditional));
    }
    if opts.industry_one_hot {
        for e in roster.entries() {
            schema.push(numeric(&format!("src_{}", e.code), FeatureBlock::Traditional));
        }
        for e in roster.entries() {
            schema.push(numeric(&format!("dst_{}", e.code), FeatureBlock::Traditional));
        }
    } else {
        schema.push(ColumnDef {
            name: "source_id".into(),
            block: FeatureBlock::Traditional,
            kind: FeatureKind::Categorical { cardinality: n },
        });
        schema.push(ColumnDef {
            name: "dest_id".into(),
            block: FeatureBlock::Traditional,
            kind: FeatureKind::Categorical { cardinality: n },
        });
    }
    let keep_network: Vec<&str> = match &opts.network_features {
        None => NETWORK_COLUMNS.to_vec(),
        Some(list) => {
            for name in list {
                if !NETWORK_COLUMNS.contains(&name.as_str()) {
                    return Err(Error::config(format!(
                        "unknown network feature `{name}`; known: {}",
                        NETWORK_COLUMNS.join(", ")
                    )));
                }
            }
            NETWORK_COLUMNS
                .iter()
                .copied()
                .filter(|c| list.iter().any(|l| l == c))
                .collect()
        }
    };
    for name in &keep_network {
        schema.push(numeric(name, FeatureBlock::Network));
    }

    let pos_of: BTreeMap<Quarter, u32> =
        quarters.iter().enumerate().map(|(i, q)| (*q, i as u32)).collect();
    let mut growth_by_key: BTreeMap<(u32, u32, u32), f64> = BTreeMap::new();
    for obs in &growth.observations {
        let pos = *pos_of
            .get(&obs.quarter)
            .ok_or_else(|| Error::internal(format!("growth quarter {} not in sample", obs.quarter)))?;
        growth_by_key.insert((obs.source, obs.dest, pos), obs.growth);
    }

    let mut keys: Vec<RowKey> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets = Vec::new();
    let mut dropped_missing_lag1 = 0usize;
    let mut dropped_missing_lag2 = 0usize;

    // growth_by_key iterates in (source, dest, pos) order; collect then
    // sort canonically by (pos, source, dest).
    for (&(source, dest, pos), &target) in &growth_by_key {
        if pos == 0 {
            continue; // defensive; growth at position 0 cannot exist
        }
        let feat_pos = (pos - 1) as usize;
        let lag1 = match growth_by_key.get(&(source, dest, pos - 1)) {
            Some(g) => *g,
            None => {
                dropped_missing_lag1 += 1;
                continue;
            }
        };
        let lag2 = if pos >= 2 {
            growth_by_key.get(&(source, dest, pos - 2)).copied()
        } else {
            None
        };
        let (lag2_value, lag2_missing) = match lag2 {
            Some(g) => (g, 0.0),
            None if opts.require_lag2 => {
                dropped_missing_lag2 += 1;
                continue;
            }
            None => (0.0, 1.0),
        };

        let table = &features[feat_pos];
        let src = &table.nodes[source as usize];
        let dst = &table.nodes[dest as usize];
        let target_quarter = quarters[pos as usize];

        let mut row = Vec::with_capacity(schema.len());
        row.push(lag1);
        row.push(lag2_value);
        if !opts.require_lag2 {
            row.push(lag2_missing);
        }
        for q in 1..=4u8 {
            row.push(if target_quarter.q() == q { 1.0 } else { 0.0 });
        }
        if opts.industry_one_hot {
            for idx in 0..n {
                row.push(if idx == source { 1.0 } else { 0.0 });
            }
            for idx in 0..n {
                row.push(if idx == dest { 1.0 } else { 0.0 });
            }
        } else {
            row.push(source as f64);
            row.push(dest as f64);
        }
        for name in &keep_network {
            let value = match *name {
                "src_in_degree" => src.in_degree as f64,
                "src_out_degree" => src.out_degree as f64,
                "src_in_strength_log1p" => src.in_strength.ln_1p(),
                "src_out_strength_log1p" => src.out_strength.ln_1p(),
                "src_betweenness_norm" => src.betweenness_norm,
                "src_eigenvector" => src.eigenvector,
                "src_clustering" => src.clustering,
                "dst_in_degree" => dst.in_degree as f64,
                "dst_out_degree" => dst.out_degree as f64,
                "dst_in_strength_log1p" => dst.in_strength.ln_1p(),
                "dst_out_strength_log1p" => dst.out_strength.ln_1p(),
                "dst_betweenness_norm" => dst.betweenness_norm,
                "dst_eigenvector" => dst.eigenvector,
                "dst_clustering" => dst.clustering,
                "two_hop" => two_hop[feat_pos].at(source as usize, dest as usize),
                "density" => table.global.density,
                // A row implies an edge at feat_pos, so the mean is defined;
                // fall back to 0 only for degenerate hand-built inputs.
                "avg_path_length" => table.global.avg_path_length.unwrap_or(0.0),
                other => return Err(Error::internal(format!("unhandled column `{other}`"))),
            };
            row.push(value);
        }

        keys.push(RowKey { quarter_pos: pos, source, dest });
        rows.push(row);
        targets.push(target);
    }

    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| keys[i]);
    let keys: Vec<RowKey> = order.iter().map(|&i| keys[i]).collect();
    let targets: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
    let mut columns = vec![Vec::with_capacity(keys.len()); schema.len()];
    for &i in &order {
        for (c, v) in rows[i].iter().enumerate() {
            columns[c].push(*v);
        }
    }

    Ok(ForecastDataset {
        quarters: quarters.to_vec(),
        schema,
        keys,
        columns,
        targets,
        dropped_missing_lag1,
        dropped_missing_lag2,
    })
}

/// One temporal evaluation fold: train on quarters 1..=train_end, test on
/// the next quarter (both 1-based positions on the sample axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSplit {
    pub train_end: usize,
    pub test: usize,
}

/// All expanding windows for a sample of `t_count` quarters.
pub fn expanding_windows(t_count: usize, min_train: usize) -> Result<Vec<WindowSplit>> {
    if min_train < 2 {
        return Err(Error::config(format!("min_train must be >= 2, got {min_train}")));
    }
    if t_count <= min_train {
        return Err(Error::config(format!(
            "need more than min_train={min_train} quarters, got {t_count}"
        )));
    }
    Ok((min_train..t_count)
        .map(|t| WindowSplit { train_end: t, test: t + 1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, FeatureOptions};
    use crate::graph::{build_graph, two_hop};
    use crate::ingest::PairTotals;

    fn quarters(n: usize) -> Vec<Quarter> {
        let start = Quarter::new(2020, 1).unwrap();
        let mut out = vec![start];
        while out.len() < n {
            out.push(out.last().unwrap().next());
        }
        out
    }

    fn totals_for(quarter: Quarter, entries: &[(u32, u32, u64)]) -> PairTotals {
        let mut t = PairTotals::new(quarter);
        for &(i, j, p) in entries {
            t.add(i, j, p);
        }
        t
    }

    #[test]
    fn growth_simple_ratio() {
        let qs = quarters(2);
        let totals = vec![
            totals_for(qs[0], &[(0, 1, 100_00)]),
            totals_for(qs[1], &[(0, 1, 110_00)]),
        ];
        let set = growth_rates(&totals, 5.0).unwrap();
        assert_eq!(set.observations.len(), 1);
        assert!((set.observations[0].growth - 0.10).abs() < 1e-12);
        assert_eq!(set.clamped, 0);
    }

    #[test]
    fn growth_requires_positive_base() {
        let qs = quarters(2);
        let totals = vec![
            totals_for(qs[0], &[(1, 2, 7_00)]),
            totals_for(qs[1], &[(0, 1, 50_00), (1, 2, 7_00)]),
        ];
        let set = growth_rates(&totals, 5.0).unwrap();
        // (0,1) appears only in the second quarter: no observation.
        assert_eq!(set.observations.len(), 1);
        assert_eq!(set.observations[0].source, 1);
    }

    #[test]
    fn growth_noncontiguous_is_fatal() {
        let q1 = Quarter::new(2020, 1).unwrap();
        let q3 = Quarter::new(2020, 3).unwrap();
        let totals = vec![totals_for(q1, &[(0, 1, 1)]), totals_for(q3, &[(0, 1, 1)])];
        assert!(growth_rates(&totals, 5.0).is_err());
    }

    #[test]
    fn growth_winsorization_clamps_and_counts() {
        let qs = quarters(2);
        let totals = vec![
            totals_for(qs[0], &[(0, 1, 1), (1, 0, 100)]),
            totals_for(qs[1], &[(0, 1, 100), (1, 0, 110)]),
        ];
        let set = growth_rates(&totals, 5.0).unwrap();
        let big = set.observations.iter().find(|o| o.source == 0).unwrap();
        assert_eq!(big.growth, 5.0);
        assert_eq!(set.clamped, 1);
    }

    #[test]
    fn windows_examples() {
        let w = expanding_windows(8, 4).unwrap();
        assert_eq!(
            w,
            vec![
                WindowSplit { train_end: 4, test: 5 },
                WindowSplit { train_end: 5, test: 6 },
                WindowSplit { train_end: 6, test: 7 },
                WindowSplit { train_end: 7, test: 8 },
            ]
        );
        assert_eq!(expanding_windows(5, 4).unwrap(), vec![WindowSplit { train_end: 4, test: 5 }]);
        assert!(expanding_windows(4, 4).is_err());
        assert!(expanding_windows(10, 1).is_err());
    }

    #[test]
    fn windows_defining_property() {
        let w = expanding_windows(23, 6).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for s in &w {
            assert!(s.train_end < s.test);
            assert!(seen.insert(s.test));
        }
        assert_eq!(seen.len(), 23 - 6);
    }

    fn tiny_pipeline(opts: &AssembleOptions) -> ForecastDataset {
        // 3 industries, 6 quarters, constant complete graph except one pair
        // that grows steadily.
        let roster = IndustryRoster::from_codes(vec!["A".into(), "B".into(), "C".into()]).unwrap();
        let qs = quarters(6);
        let mut totals = Vec::new();
        for (t, &q) in qs.iter().enumerate() {
            let grow = 100_00 + 10_00 * t as u64;
            totals.push(totals_for(
                q,
                &[
                    (0, 1, grow),
                    (1, 0, 50_00),
                    (0, 2, 20_00),
                    (2, 0, 20_00),
                    (1, 2, 30_00),
                    (2, 1, 30_00),
                ],
            ));
        }
        let graphs: Vec<_> = totals.iter().map(|t| build_graph(t, &roster).unwrap()).collect();
        let fopts = FeatureOptions::default();
        let features: Vec<_> = graphs.iter().map(|g| extract_features(g, &fopts)).collect();
        let hops: Vec<_> = graphs.iter().map(|g| two_hop(g, true)).collect();
        let growth = growth_rates(&totals, 5.0).unwrap();
        assemble(&qs, &features, &hops, &growth, &roster, opts).unwrap()
    }

    #[test]
    fn combined_columns_are_disjoint_union() {
        let ds = tiny_pipeline(&AssembleOptions::default());
        let names = |spec: SpecKind| -> Vec<String> {
            ds.view(spec, 0..ds.n_rows())
                .columns
                .iter()
                .map(|(d, _)| d.name.clone())
                .collect()
        };
        let trad = names(SpecKind::Traditional);
        let net = names(SpecKind::Network);
        let combined = names(SpecKind::Combined);
        assert_eq!(combined.len(), trad.len() + net.len());
        for t in &trad {
            assert!(combined.contains(t));
            assert!(!net.contains(t));
        }
        for n in &net {
            assert!(combined.contains(n));
        }
    }

    #[test]
    fn early_quarters_have_no_rows() {
        let ds = tiny_pipeline(&AssembleOptions::default());
        // positions 0..2 can never satisfy target + lag1 + lag2.
        assert_eq!(ds.rows_before_quarter(3), 0);
        assert!(ds.n_rows() > 0);
        assert!(ds.keys.iter().all(|k| k.quarter_pos >= 3));
    }

    #[test]
    fn row_carries_lagged_feature_values() {
        let ds = tiny_pipeline(&AssembleOptions::default());
        // Pair (0,1) grows 10 GBP per quarter: at target pos p the growth is
        // 10/(100+10(p-1)) and lag1 is 10/(100+10(p-2)).
        let row = ds.keys.iter().position(|k| k.source == 0 && k.dest == 1).unwrap();
        let pos = ds.keys[row].quarter_pos as f64;
        let lag1_col = ds.schema.iter().position(|c| c.name == "lag1_growth").unwrap();
        let expected_lag1 = 10.0 / (100.0 + 10.0 * (pos - 2.0));
        assert!((ds.columns[lag1_col][row] - expected_lag1).abs() < 1e-12);
        let expected_target = 10.0 / (100.0 + 10.0 * (pos - 1.0));
        assert!((ds.targets[row] - expected_target).abs() < 1e-12);
    }

    #[test]
    fn one_hot_expands_industry_columns() {
        let opts = AssembleOptions { industry_one_hot: true, ..Default::default() };
        let ds = tiny_pipeline(&opts);
        assert!(ds.schema.iter().any(|c| c.name == "src_A"));
        assert!(ds.schema.iter().all(|c| c.name != "source_id"));
        let col = ds.schema.iter().position(|c| c.name == "src_A").unwrap();
        let key_col: Vec<f64> = ds
            .keys
            .iter()
            .map(|k| if k.source == 0 { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(ds.columns[col], key_col);
    }

    #[test]
    fn network_feature_pruning() {
        let opts = AssembleOptions {
            network_features: Some(vec!["two_hop".into(), "density".into()]),
            ..Default::default()
        };
        let ds = tiny_pipeline(&opts);
        let net: Vec<&str> = ds
            .schema
            .iter()
            .filter(|c| c.block == FeatureBlock::Network)
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(net, vec!["two_hop", "density"]);

        let bad = AssembleOptions {
            network_features: Some(vec!["pagerank".into()]),
            ..Default::default()
        };
        let roster = IndustryRoster::from_codes(vec!["A".into(), "B".into()]).unwrap();
        let err = assemble(&[], &[], &[], &GrowthSet { observations: vec![], clip: 5.0, clamped: 0 }, &roster, &bad);
        assert!(err.is_err());
    }

    #[test]
    fn keys_sorted_and_quarter_ranges_consistent() {
        let ds = tiny_pipeline(&AssembleOptions::default());
        let mut sorted = ds.keys.clone();
        sorted.sort();
        assert_eq!(sorted, ds.keys);
        let total: usize = (0..ds.quarters.len() as u32)
            .map(|p| ds.rows_of_quarter(p).len())
            .sum();
        assert_eq!(total, ds.n_rows());
    }
}
