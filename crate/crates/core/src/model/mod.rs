//! In-repo tree-ensemble regressors: random forests and squared-error
//! gradient boosting over CART trees. No external learner, so every fit is
//! reproducible from (dataset, params, seed) alone.

mod metrics;
mod tree;

pub use metrics::{evaluate_metrics, MetricSet};
pub use tree::{SplitRule, Tree, TreeNode, TreeParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::numeric::derive_seed;
use tree::{bin_columns, fit_tree_binned};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Forest,
    Boosted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            bootstrap: true,
            tree: TreeParams {
                max_depth: Some(8),
                min_leaf: 20,
                feature_subsample: 1.0 / 3.0,
                max_bins: 255,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_rounds: 300,
            learning_rate: 0.05,
            tree: TreeParams {
                max_depth: Some(3),
                min_leaf: 20,
                feature_subsample: 1.0,
                max_bins: 255,
            },
            seed: 0,
        }
    }
}

/// A fitted ensemble. Prediction is deterministic given (model, input);
/// the stored schema hash must match the dataset at predict time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: ModelKind,
    /// Base prediction: 0 for forests, the training-target mean for
    /// boosted models.
    pub base: f64,
    /// Shrinkage applied to each boosted tree; absent for forests.
    pub learning_rate: Option<f64>,
    pub trees: Vec<Tree>,
    pub schema_hash: String,
    pub seed: u64,
}

impl EnsembleModel {
    pub fn predict(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        if data.schema_hash != self.schema_hash {
            return Err(Error::config(format!(
                "schema hash mismatch: model {} vs dataset {}",
                self.schema_hash, data.schema_hash
            )));
        }
        let columns = &data.columns;
        Ok(exec::map_indexed(data.n_rows, |row| self.predict_prepared(columns, row)))
    }

    fn predict_prepared(
        &self,
        columns: &[(&crate::dataset::ColumnDef, &[f64])],
        row: usize,
    ) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(columns, row)).sum();
        match self.kind {
            ModelKind::Forest => {
                if self.trees.is_empty() {
                    self.base
                } else {
                    sum / self.trees.len() as f64
                }
            }
            ModelKind::Boosted => self.base + self.learning_rate.unwrap_or(1.0) * sum,
        }
    }
}

fn check_training_inputs(data: &FeatureMatrix, targets: &[f64]) -> Result<()> {
    if data.n_rows != targets.len() {
        return Err(Error::data(format!(
            "feature rows ({}) and targets ({}) differ",
            data.n_rows,
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::data("cannot fit on an empty dataset".to_string()));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::data("targets must be finite".to_string()));
    }
    Ok(())
}

/// Fits a single CART regression tree. Constant targets produce a single
/// leaf; shuffling training rows leaves the fitted tree identical.
pub fn fit_tree(
    data: &FeatureMatrix,
    targets: &[f64],
    params: &TreeParams,
    seed: u64,
) -> Result<Tree> {
    params.validate()?;
    check_training_inputs(data, targets)?;
    let binned = bin_columns(data, params.max_bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<u32> = (0..targets.len() as u32).collect();
    Ok(fit_tree_binned(&binned, targets, params, &mut rng, rows))
}

/// Bagged forest: per-tree bootstrap resamples and feature subsampling,
/// prediction is the mean over trees. Per-tree seeds are derived from the
/// base seed, so trees can be fitted in parallel with identical results.
pub fn fit_forest(
    data: &FeatureMatrix,
    targets: &[f64],
    params: &ForestParams,
) -> Result<EnsembleModel> {
    if params.n_trees < 1 {
        return Err(Error::config("n_trees must be >= 1".to_string()));
    }
    params.tree.validate()?;
    check_training_inputs(data, targets)?;
    let binned = bin_columns(data, params.tree.max_bins)?;
    let n = targets.len();

    let trees = exec::map_indexed(params.n_trees, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, i as u64));
        let rows: Vec<u32> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
        } else {
            (0..n as u32).collect()
        };
        fit_tree_binned(&binned, targets, &params.tree, &mut rng, rows)
    });

    Ok(EnsembleModel {
        kind: ModelKind::Forest,
        base: 0.0,
        learning_rate: None,
        trees,
        schema_hash: data.schema_hash.clone(),
        seed: params.seed,
    })
}

/// Stagewise squared-error boosting of shallow trees on residuals.
/// Zero rounds yield the global-mean predictor.
pub fn fit_boosted(
    data: &FeatureMatrix,
    targets: &[f64],
    params: &BoostParams,
) -> Result<EnsembleModel> {
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::config(format!(
            "learning_rate {} outside (0, 1]",
            params.learning_rate
        )));
    }
    params.tree.validate()?;
    check_training_inputs(data, targets)?;
    let binned = bin_columns(data, params.tree.max_bins)?;
    let n = targets.len();

    let base = targets.iter().sum::<f64>() / n as f64;
    let mut residuals: Vec<f64> = targets.iter().map(|t| t - base).collect();
    let mut trees = Vec::with_capacity(params.n_rounds);
    let rows: Vec<u32> = (0..n as u32).collect();

    for round in 0..params.n_rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, round as u64));
        let tree = fit_tree_binned(&binned, &residuals, &params.tree, &mut rng, rows.clone());
        for (row, r) in residuals.iter_mut().enumerate() {
            *r -= params.learning_rate * tree.predict_row(&data.columns, row);
        }
        trees.push(tree);
    }

    Ok(EnsembleModel {
        kind: ModelKind::Boosted,
        base,
        learning_rate: Some(params.learning_rate),
        trees,
        schema_hash: data.schema_hash.clone(),
        seed: params.seed,
    })
}

/// Versioned on-disk form; JSON with round-trip-exact floats.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: EnsembleModel,
}

const MODEL_FORMAT: &str = "paynet-model";
const MODEL_VERSION: u32 = 1;

pub fn model_to_json(model: &EnsembleModel) -> String {
    serde_json::to_string_pretty(&ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    })
    .expect("model serialization cannot fail")
}

pub fn model_from_json(json: &str) -> Result<EnsembleModel> {
    let file: ModelFile =
        serde_json::from_str(json).map_err(|e| Error::data(format!("bad model file: {e}")))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::data(format!("not a model file (format `{}`)", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::data(format!("unsupported model version {}", file.version)));
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnDef, FeatureBlock, FeatureKind};

    fn defs(kinds: &[FeatureKind]) -> Vec<ColumnDef> {
        kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| ColumnDef {
                name: format!("f{i}"),
                block: FeatureBlock::Traditional,
                kind: *kind,
            })
            .collect()
    }

    fn matrix<'a>(defs: &'a [ColumnDef], cols: &'a [Vec<f64>]) -> FeatureMatrix<'a> {
        let columns: Vec<(&ColumnDef, &[f64])> =
            defs.iter().zip(cols).map(|(d, c)| (d, c.as_slice())).collect();
        let schema_hash = crate::dataset::schema_hash(defs.iter());
        FeatureMatrix { columns, schema_hash, n_rows: cols[0].len() }
    }

    fn unbounded(min_leaf: usize) -> TreeParams {
        TreeParams { max_depth: None, min_leaf, feature_subsample: 1.0, max_bins: 255 }
    }

    #[test]
    fn step_function_split_in_gap() {
        let d = defs(&[FeatureKind::Numeric]);
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let m = matrix(&d, &cols);
        let y = [0.0, 0.0, 1.0, 1.0];
        let params = TreeParams { max_depth: Some(1), min_leaf: 1, ..unbounded(1) };
        let tree = fit_tree(&m, &y, &params, 0).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split { rule: SplitRule::Threshold(t), left, right, .. } => {
                assert!(*t > 2.0 && *t <= 3.0, "threshold {t} outside (2, 3]");
                let (l, r) = (&tree.nodes[*left as usize], &tree.nodes[*right as usize]);
                assert_eq!(l, &TreeNode::Leaf { value: 0.0 });
                assert_eq!(r, &TreeNode::Leaf { value: 1.0 });
            }
            other => panic!("expected a threshold split, got {other:?}"),
        }
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let d = defs(&[FeatureKind::Numeric]);
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]];
        let m = matrix(&d, &cols);
        let y = [2.5; 5];
        let tree = fit_tree(&m, &y, &unbounded(1), 0).unwrap();
        assert_eq!(tree.nodes, vec![TreeNode::Leaf { value: 2.5 }]);
    }

    #[test]
    fn unbounded_depth_memorizes_distinct_rows() {
        let d = defs(&[FeatureKind::Numeric, FeatureKind::Numeric]);
        let n = 50;
        let cols = vec![
            (0..n).map(|i| (i * 7 % 50) as f64).collect::<Vec<f64>>(),
            (0..n).map(|i| (i * 13 % 50) as f64).collect::<Vec<f64>>(),
        ];
        let m = matrix(&d, &cols);
        let y: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let tree = fit_tree(&m, &y, &unbounded(1), 0).unwrap();
        let mse: f64 = (0..n)
            .map(|r| {
                let e = tree.predict_row(&m.columns, r) - y[r];
                e * e
            })
            .sum::<f64>()
            / n as f64;
        assert!(mse < 1e-24, "training mse {mse}");
    }

    #[test]
    fn fit_tree_is_permutation_invariant() {
        let d = defs(&[FeatureKind::Numeric, FeatureKind::Categorical { cardinality: 4 }]);
        let n = 40;
        let base_cols = vec![
            (0..n).map(|i| ((i * 29) % 17) as f64).collect::<Vec<f64>>(),
            (0..n).map(|i| (i % 4) as f64).collect::<Vec<f64>>(),
        ];
        let y: Vec<f64> = (0..n).map(|i| ((i * 3) % 7) as f64 + (i % 4) as f64).collect();
        let params = TreeParams { feature_subsample: 0.5, ..unbounded(2) };

        let m = matrix(&d, &base_cols);
        let tree = fit_tree(&m, &y, &params, 9).unwrap();

        // Reverse the row order and fit again.
        let rev_cols: Vec<Vec<f64>> = base_cols
            .iter()
            .map(|c| c.iter().rev().copied().collect())
            .collect();
        let rev_y: Vec<f64> = y.iter().rev().copied().collect();
        let m2 = matrix(&d, &rev_cols);
        let tree2 = fit_tree(&m2, &rev_y, &params, 9).unwrap();
        assert_eq!(tree, tree2);
    }

    #[test]
    fn categorical_split_groups_by_target_mean() {
        let d = defs(&[FeatureKind::Categorical { cardinality: 3 }]);
        // category 1 is low, categories 0 and 2 are high: the optimal
        // grouping is not contiguous in category id.
        let cols = vec![vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]];
        let m = matrix(&d, &cols);
        let y = [10.0, 10.1, 0.0, 0.2, 10.2, 9.9];
        let params = TreeParams { max_depth: Some(1), ..unbounded(1) };
        let tree = fit_tree(&m, &y, &params, 0).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split { rule: SplitRule::Categories(set), .. } => {
                assert_eq!(set, &vec![1]);
            }
            other => panic!("expected categorical split, got {other:?}"),
        }
    }

    #[test]
    fn single_tree_forest_no_bootstrap_equals_tree() {
        let d = defs(&[FeatureKind::Numeric, FeatureKind::Numeric]);
        let n = 60;
        let cols = vec![
            (0..n).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<f64>>(),
            (0..n).map(|i| (i as f64 * 0.11).cos()).collect::<Vec<f64>>(),
        ];
        let m = matrix(&d, &cols);
        let y: Vec<f64> = (0..n).map(|i| cols[0][i] * 2.0 + cols[1][i]).collect();
        let tree_params = TreeParams { max_depth: Some(4), min_leaf: 2, ..unbounded(2) };
        let forest = fit_forest(
            &m,
            &y,
            &ForestParams { n_trees: 1, bootstrap: false, tree: tree_params.clone(), seed: 5 },
        )
        .unwrap();
        let single = fit_tree(&m, &y, &tree_params, derive_seed(5, 0)).unwrap();
        let fp = forest.predict(&m).unwrap();
        let tp: Vec<f64> = (0..n).map(|r| single.predict_row(&m.columns, r)).collect();
        assert_eq!(fp, tp);
    }

    #[test]
    fn forest_is_seed_deterministic() {
        let d = defs(&[FeatureKind::Numeric]);
        let n = 80;
        let cols = vec![(0..n).map(|i| (i % 13) as f64).collect::<Vec<f64>>()];
        let m = matrix(&d, &cols);
        let y: Vec<f64> = (0..n).map(|i| ((i * 5) % 11) as f64).collect();
        let params = ForestParams { n_trees: 12, ..Default::default() };
        let params = ForestParams {
            tree: TreeParams { min_leaf: 2, ..params.tree },
            ..params
        };
        let a = fit_forest(&m, &y, &params).unwrap();
        let b = fit_forest(&m, &y, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&m).unwrap(), b.predict(&m).unwrap());
    }

    #[test]
    fn forest_predictions_bounded_by_training_targets() {
        let d = defs(&[FeatureKind::Numeric]);
        let n = 100;
        let cols = vec![(0..n).map(|i| (i as f64 * 1.7) % 23.0).collect::<Vec<f64>>()];
        let m = matrix(&d, &cols);
        let y: Vec<f64> = (0..n).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
        let forest = fit_forest(
            &m,
            &y,
            &ForestParams { n_trees: 20, ..ForestParams::default() },
        )
        .unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for p in forest.predict(&m).unwrap() {
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn zero_rounds_boosting_predicts_mean() {
        let d = defs(&[FeatureKind::Numeric]);
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let m = matrix(&d, &cols);
        let y = [1.0, 2.0, 3.0, 6.0];
        let params = BoostParams { n_rounds: 0, ..BoostParams::default() };
        let model = fit_boosted(&m, &y, &params).unwrap();
        let mean = y.iter().sum::<f64>() / 4.0;
        for p in model.predict(&m).unwrap() {
            assert_eq!(p, mean);
        }
    }

    #[test]
    fn boosting_training_mse_non_increasing() {
        let d = defs(&[FeatureKind::Numeric, FeatureKind::Numeric]);
        let n = 120;
        let cols = vec![
            (0..n).map(|i| ((i * 7) % 31) as f64).collect::<Vec<f64>>(),
            (0..n).map(|i| ((i * 3) % 13) as f64).collect::<Vec<f64>>(),
        ];
        let m = matrix(&d, &cols);
        let y: Vec<f64> =
            (0..n).map(|i| cols[0][i] * 0.3 - cols[1][i] * 0.7 + ((i % 5) as f64)).collect();

        let mut mses = Vec::new();
        for rounds in [0usize, 1, 3, 8, 20, 50] {
            let params = BoostParams {
                n_rounds: rounds,
                learning_rate: 0.3,
                tree: TreeParams { max_depth: Some(3), min_leaf: 5, ..Default::default() },
                seed: 2,
            };
            let model = fit_boosted(&m, &y, &params).unwrap();
            let preds = model.predict(&m).unwrap();
            let mse = preds
                .iter()
                .zip(&y)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / n as f64;
            mses.push(mse);
        }
        for w in mses.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "mse increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn one_full_rate_round_equals_tree_on_residuals() {
        let d = defs(&[FeatureKind::Numeric]);
        let n = 30;
        let cols = vec![(0..n).map(|i| i as f64).collect::<Vec<f64>>()];
        let m = matrix(&d, &cols);
        let y: Vec<f64> = (0..n).map(|i| ((i * 11) % 7) as f64).collect();
        let mean = y.iter().sum::<f64>() / n as f64;

        let boost = fit_boosted(
            &m,
            &y,
            &BoostParams { n_rounds: 1, learning_rate: 1.0, tree: unbounded(1), seed: 3 },
        )
        .unwrap();
        let residuals: Vec<f64> = y.iter().map(|t| t - mean).collect();
        let tree = fit_tree(&m, &residuals, &unbounded(1), derive_seed(3, 0)).unwrap();
        for row in 0..n {
            let a = boost.predict(&m).unwrap()[row];
            let b = mean + tree.predict_row(&m.columns, row);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_params_are_config_errors() {
        let d = defs(&[FeatureKind::Numeric]);
        let cols = vec![vec![1.0, 2.0]];
        let m = matrix(&d, &cols);
        let y = [1.0, 2.0];
        assert!(fit_forest(&m, &y, &ForestParams { n_trees: 0, ..Default::default() }).is_err());
        assert!(fit_boosted(
            &m,
            &y,
            &BoostParams { learning_rate: 0.0, ..Default::default() }
        )
        .is_err());
        assert!(fit_boosted(
            &m,
            &y,
            &BoostParams { learning_rate: 1.5, ..Default::default() }
        )
        .is_err());
    }

    #[test]
    fn model_json_round_trips_bit_exactly() {
        let d = defs(&[FeatureKind::Numeric, FeatureKind::Categorical { cardinality: 3 }]);
        let cols = vec![
            vec![0.1, 0.2, 0.37, 0.41, 0.5, 0.9],
            vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0],
        ];
        let m = matrix(&d, &cols);
        let y = [0.3, 1.7, -0.2, 0.9, 2.2, -1.1];
        let model = fit_boosted(
            &m,
            &y,
            &BoostParams { n_rounds: 5, learning_rate: 0.5, tree: unbounded(1), seed: 8 },
        )
        .unwrap();
        let json = model_to_json(&model);
        let back = model_from_json(&json).unwrap();
        assert_eq!(model, back);
        assert_eq!(model_to_json(&back), json);
        assert_eq!(model.predict(&m).unwrap(), back.predict(&m).unwrap());

        assert!(model_from_json("{\"format\":\"other\",\"version\":1,\"model\":null}").is_err());
    }

    #[test]
    fn schema_hash_mismatch_is_rejected() {
        let d = defs(&[FeatureKind::Numeric]);
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let m = matrix(&d, &cols);
        let y = [0.0, 0.0, 1.0, 1.0];
        let model = fit_tree_model(&m, &y);
        let other_defs = defs(&[FeatureKind::Categorical { cardinality: 9 }]);
        let m2 = matrix(&other_defs, &cols);
        assert!(model.predict(&m2).is_err());
    }

    fn fit_tree_model(m: &FeatureMatrix, y: &[f64]) -> EnsembleModel {
        fit_forest(
            m,
            y,
            &ForestParams { n_trees: 1, bootstrap: false, tree: unbounded(1), seed: 0 },
        )
        .unwrap()
    }
}
