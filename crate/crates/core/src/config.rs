//! Run configuration: one serializable struct covering every stage, with a
//! content hash that is embedded in all outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::AssembleOptions;
use crate::error::{Error, Result};
use crate::evaluate::{default_periods, DmVariance, ExperimentConfig, ModelChoice, PeriodDef};
use crate::features::{EigDirection, FeatureOptions};
use crate::ingest::SelfFlowPolicy;
use crate::model::{BoostParams, ForestParams, TreeParams};
use crate::quarter::Quarter;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Input record CSV; when absent the run generates synthetic records.
    pub input_csv: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { input_csv: None, out_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosterSource {
    /// Distinct codes observed in the input, sorted.
    #[default]
    Infer,
    /// Fixed list from `roster.file` (CSV `code,name,category`).
    File,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RosterConfig {
    pub source: RosterSource,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub self_flows: SelfFlowPolicy,
    /// Symmetric growth-rate winsorization bound (5.0 = ±500%).
    pub winsor_clip: f64,
    /// Optional inclusive sample bounds; records outside are rejected.
    pub start: Option<Quarter>,
    pub end: Option<Quarter>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { self_flows: SelfFlowPolicy::Drop, winsor_clip: 5.0, start: None, end: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub weighted_betweenness: bool,
    pub eigenvector: EigDirection,
    /// Square the row-normalized matrix (default) or the raw one for the
    /// two-hop feature.
    pub two_hop_normalized: bool,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            weighted_betweenness: false,
            eigenvector: EigDirection::Left,
            two_hop_normalized: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Training quarters required before the first test quarter; 8 keeps
    /// two full seasonal cycles in every training set.
    pub min_train: usize,
    pub require_lag2: bool,
    pub industry_one_hot: bool,
    /// Optional subset of network-block features to keep.
    pub network_features: Option<Vec<String>>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            min_train: 8,
            require_lag2: true,
            industry_one_hot: false,
            network_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindConfig {
    #[default]
    Forest,
    Boosted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindConfig,
    pub n_trees: usize,
    pub max_depth: Option<u32>,
    pub min_leaf: usize,
    /// Fraction of features considered per split (forests only).
    pub feature_subsample: f64,
    pub bootstrap: bool,
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub boost_depth: u32,
    pub max_bins: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKindConfig::Forest,
            n_trees: 200,
            max_depth: Some(8),
            min_leaf: 20,
            feature_subsample: 1.0 / 3.0,
            bootstrap: true,
            n_rounds: 300,
            learning_rate: 0.05,
            boost_depth: 3,
            max_bins: 255,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub min_test_rows: usize,
    /// Use the Bartlett-kernel HAC variance instead of the plain sample
    /// variance in the DM test.
    pub dm_hac: bool,
    pub hac_lag: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { min_test_rows: 30, dm_hac: false, hac_lag: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker thread cap; `None` uses all cores.
    pub jobs: Option<usize>,
    pub paths: PathsConfig,
    pub roster: RosterConfig,
    pub ingest: IngestConfig,
    pub features: FeaturesConfig,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub evaluate: EvaluateConfig,
    pub periods: Vec<PeriodDef>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: None,
            paths: PathsConfig::default(),
            roster: RosterConfig::default(),
            ingest: IngestConfig::default(),
            features: FeaturesConfig::default(),
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            evaluate: EvaluateConfig::default(),
            periods: default_periods(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))
    }

    /// Canonical serialized form; the config hash is taken over this.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// First 16 hex digits of the SHA-256 of the resolved config
    /// (including the seed).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            weighted_betweenness: self.features.weighted_betweenness,
            eigenvector: self.features.eigenvector,
        }
    }

    pub fn assemble_options(&self) -> AssembleOptions {
        AssembleOptions {
            require_lag2: self.dataset.require_lag2,
            industry_one_hot: self.dataset.industry_one_hot,
            network_features: self.dataset.network_features.clone(),
        }
    }

    pub fn model_choice(&self) -> ModelChoice {
        match self.model.kind {
            ModelKindConfig::Forest => ModelChoice::Forest(ForestParams {
                n_trees: self.model.n_trees,
                bootstrap: self.model.bootstrap,
                tree: TreeParams {
                    max_depth: self.model.max_depth,
                    min_leaf: self.model.min_leaf,
                    feature_subsample: self.model.feature_subsample,
                    max_bins: self.model.max_bins,
                },
                seed: self.seed,
            }),
            ModelKindConfig::Boosted => ModelChoice::Boosted(BoostParams {
                n_rounds: self.model.n_rounds,
                learning_rate: self.model.learning_rate,
                tree: TreeParams {
                    max_depth: Some(self.model.boost_depth),
                    min_leaf: self.model.min_leaf,
                    feature_subsample: 1.0,
                    max_bins: self.model.max_bins,
                },
                seed: self.seed,
            }),
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model_choice(),
            min_train: self.dataset.min_train,
            min_test_rows: self.evaluate.min_test_rows,
            dm_variance: if self.evaluate.dm_hac {
                DmVariance::Hac { lag: self.evaluate.hac_lag }
            } else {
                DmVariance::Plain
            },
            seed: self.seed,
        }
    }

    /// One-line model description for report headers.
    pub fn model_summary(&self) -> String {
        match self.model.kind {
            ModelKindConfig::Forest => format!(
                "random forest (trees={}, max_depth={}, min_leaf={}, feature_subsample={:.4}, bootstrap={})",
                self.model.n_trees,
                self.model.max_depth.map_or("none".to_string(), |d| d.to_string()),
                self.model.min_leaf,
                self.model.feature_subsample,
                self.model.bootstrap,
            ),
            ModelKindConfig::Boosted => format!(
                "gradient boosting (rounds={}, learning_rate={}, depth={}, min_leaf={})",
                self.model.n_rounds, self.model.learning_rate, self.model.boost_depth, self.model.min_leaf,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_canonical_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn hash_changes_with_seed_and_params() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = RunConfig::default();
        c.model.n_trees = 17;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[model]\nkind = \"boosted\"\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model.kind, ModelKindConfig::Boosted);
        assert_eq!(cfg.dataset.min_train, 8);
        assert_eq!(cfg.periods.len(), 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sed = 9\n").is_err());
        assert!(RunConfig::from_toml("[model]\nntrees = 10\n").is_err());
    }
}
