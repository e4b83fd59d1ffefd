//! The three-specification forecasting experiment: expanding-window
//! fits, pooled and per-window metrics, Diebold-Mariano comparison,
//! period-segmented breakdowns and network-evolution summaries.

mod dm;

pub use dm::{diebold_mariano, dm_from_differentials, DmOutcome, DmVariance};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{expanding_windows, ForecastDataset, RowKey, SpecKind, WindowSplit};
use crate::error::{Error, Result};
use crate::exec;
use crate::features::{average_path_length, clustering_coefficient, network_density, strength_centrality};
use crate::graph::QuarterlyGraph;
use crate::model::{
    evaluate_metrics, fit_boosted, fit_forest, BoostParams, EnsembleModel, ForestParams, MetricSet,
};
use crate::numeric::{derive_seed, stable_sum};
use crate::quarter::Quarter;
use crate::roster::IndustryRoster;

/// Which ensemble the experiment fits per window and specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelChoice {
    Forest(ForestParams),
    Boosted(BoostParams),
}

impl ModelChoice {
    fn fit(
        &self,
        data: &crate::dataset::FeatureMatrix,
        targets: &[f64],
        seed: u64,
    ) -> Result<EnsembleModel> {
        match self {
            ModelChoice::Forest(p) => fit_forest(data, targets, &ForestParams { seed, ..p.clone() }),
            ModelChoice::Boosted(p) => fit_boosted(data, targets, &BoostParams { seed, ..p.clone() }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    /// Minimum number of training quarters before the first test quarter.
    pub min_train: usize,
    /// Windows whose test quarter has fewer rows are flagged and excluded
    /// from pooled statistics.
    pub min_test_rows: usize,
    pub dm_variance: DmVariance,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelChoice::Forest(ForestParams::default()),
            min_train: 8,
            min_test_rows: 30,
            dm_variance: DmVariance::Plain,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub train_end: usize,
    pub test_quarter: Quarter,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecOutcome {
    pub spec: SpecKind,
    /// Metrics over all pooled test observations (pooled residuals, not
    /// averaged window scores).
    pub pooled: MetricSet,
    /// Across-window standard deviation of per-window R².
    pub window_r2_std: Option<f64>,
    /// Pooled-R² gain over the traditional specification, percentage
    /// points; `None` for the traditional row itself.
    pub improvement_pp: Option<f64>,
    pub windows: Vec<WindowMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcludedWindow {
    pub train_end: usize,
    pub test_quarter: Quarter,
    pub test_rows: usize,
}

/// Everything the experiment produces, including per-observation test
/// predictions for downstream segmentation.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub specs: Vec<SpecOutcome>,
    pub dm_traditional_vs_combined: DmOutcome,
    pub excluded: Vec<ExcludedWindow>,
    pub quarters: Vec<Quarter>,
    /// Keys of pooled test observations, in window order; identical across
    /// specifications.
    pub keys: Vec<RowKey>,
    pub targets: Vec<f64>,
    /// Pooled test predictions per specification, aligned with `keys` and
    /// ordered as [Traditional, Network, Combined].
    pub predictions: Vec<Vec<f64>>,
}

struct WindowFit {
    split: WindowSplit,
    preds: Vec<Vec<f64>>, // per spec
}

enum WindowOutcome {
    Fitted(Box<WindowFit>),
    Excluded(ExcludedWindow),
    Failed(Error),
}

/// Fits every window and specification, pools test-set forecasts, and
/// compares the combined specification against the traditional one.
pub fn run_experiment(dataset: &ForecastDataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let t_count = dataset.quarters.len();
    let windows = expanding_windows(t_count, cfg.min_train)?;

    let outcomes = exec::map_indexed(windows.len(), |w| {
        let split = windows[w];
        let train_rows = 0..dataset.rows_before_quarter(split.train_end as u32);
        let test_rows = dataset.rows_of_quarter(split.test as u32 - 1);
        let test_quarter = dataset.quarters[split.test - 1];
        if test_rows.len() < cfg.min_test_rows || train_rows.is_empty() {
            return WindowOutcome::Excluded(ExcludedWindow {
                train_end: split.train_end,
                test_quarter,
                test_rows: test_rows.len(),
            });
        }
        let mut preds = Vec::with_capacity(SpecKind::ALL.len());
        for (s, spec) in SpecKind::ALL.iter().enumerate() {
            let train = dataset.view(*spec, train_rows.clone());
            let test = dataset.view(*spec, test_rows.clone());
            let seed = derive_seed(cfg.seed, (w * SpecKind::ALL.len() + s) as u64);
            let model = match cfg.model.fit(&train, dataset.targets_for(train_rows.clone()), seed) {
                Ok(m) => m,
                Err(e) => return WindowOutcome::Failed(e),
            };
            match model.predict(&test) {
                Ok(p) => preds.push(p),
                Err(e) => return WindowOutcome::Failed(e),
            }
        }
        WindowOutcome::Fitted(Box::new(WindowFit { split, preds }))
    });

    let mut excluded = Vec::new();
    let mut keys: Vec<RowKey> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut predictions: Vec<Vec<f64>> = vec![Vec::new(); SpecKind::ALL.len()];
    let mut window_metrics: Vec<Vec<WindowMetrics>> = vec![Vec::new(); SpecKind::ALL.len()];

    for outcome in outcomes {
        match outcome {
            WindowOutcome::Failed(e) => return Err(e),
            WindowOutcome::Excluded(x) => excluded.push(x),
            WindowOutcome::Fitted(fit) => {
                let split = fit.split;
                let test_rows = dataset.rows_of_quarter(split.test as u32 - 1);
                let test_quarter = dataset.quarters[split.test - 1];
                let window_targets = dataset.targets_for(test_rows.clone());
                keys.extend_from_slice(&dataset.keys[test_rows.clone()]);
                targets.extend_from_slice(window_targets);
                for (s, preds) in fit.preds.into_iter().enumerate() {
                    window_metrics[s].push(WindowMetrics {
                        train_end: split.train_end,
                        test_quarter,
                        metrics: evaluate_metrics(&preds, window_targets)?,
                    });
                    predictions[s].extend(preds);
                }
            }
        }
    }

    if targets.len() < 2 {
        return Err(Error::data(format!(
            "experiment produced only {} pooled test observations",
            targets.len()
        )));
    }

    let mut specs = Vec::with_capacity(SpecKind::ALL.len());
    let mut traditional_r2: Option<f64> = None;
    for (s, spec) in SpecKind::ALL.iter().enumerate() {
        let pooled = evaluate_metrics(&predictions[s], &targets)?;
        if *spec == SpecKind::Traditional {
            traditional_r2 = pooled.r2;
        }
        let r2s: Vec<f64> =
            window_metrics[s].iter().filter_map(|w| w.metrics.r2).collect();
        let window_r2_std = if r2s.len() >= 2 {
            let mean = r2s.iter().sum::<f64>() / r2s.len() as f64;
            let var =
                r2s.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (r2s.len() - 1) as f64;
            Some(var.sqrt())
        } else {
            None
        };
        let improvement_pp = match (*spec, traditional_r2, pooled.r2) {
            (SpecKind::Traditional, _, _) => None,
            (_, Some(base), Some(own)) => Some((own - base) * 100.0),
            _ => None,
        };
        specs.push(SpecOutcome {
            spec: *spec,
            pooled,
            window_r2_std,
            improvement_pp,
            windows: std::mem::take(&mut window_metrics[s]),
        });
    }

    let errors = |s: usize| -> Vec<f64> {
        predictions[s].iter().zip(&targets).map(|(p, t)| t - p).collect()
    };
    let dm = diebold_mariano(&errors(0), &errors(2), cfg.dm_variance)?;

    Ok(ExperimentResult {
        specs,
        dm_traditional_vs_combined: dm,
        excluded,
        quarters: dataset.quarters.clone(),
        keys,
        targets,
        predictions,
    })
}

/// A named, inclusive quarter range used for segmentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodDef {
    pub name: String,
    pub start: Quarter,
    pub end: Quarter,
}

impl PeriodDef {
    pub fn contains(&self, q: Quarter) -> bool {
        q >= self.start && q <= self.end
    }
}

/// The default segmentation: pre-pandemic, pandemic, recovery.
pub fn default_periods() -> Vec<PeriodDef> {
    let q = |y, i| Quarter::new(y, i).expect("static quarter");
    vec![
        PeriodDef { name: "Pre-Pandemic (2017-2019)".into(), start: q(2017, 1), end: q(2019, 4) },
        PeriodDef { name: "Pandemic (2020-2021)".into(), start: q(2020, 1), end: q(2021, 4) },
        PeriodDef { name: "Recovery (2022-2024)".into(), start: q(2022, 1), end: q(2024, 4) },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodRow {
    pub name: String,
    pub start: Quarter,
    pub end: Quarter,
    /// Per-spec metrics over the period's pooled test observations, in
    /// [Traditional, Network, Combined] order; `None` marks an empty or
    /// single-observation period.
    pub per_spec: Vec<Option<MetricSet>>,
    /// Combined-vs-traditional pooled-R² gain within the period, pp.
    pub improvement_pp: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodBreakdown {
    pub rows: Vec<PeriodRow>,
}

/// Recomputes metrics per named period over that period's pooled test
/// observations. Every evaluated test quarter must fall in exactly one
/// period.
pub fn period_breakdown(result: &ExperimentResult, periods: &[PeriodDef]) -> Result<PeriodBreakdown> {
    // Partition check over the quarters that actually carry observations.
    let mut seen: BTreeMap<Quarter, usize> = BTreeMap::new();
    for key in &result.keys {
        *seen.entry(result.quarters[key.quarter_pos as usize]).or_insert(0) += 1;
    }
    for (&q, _) in &seen {
        let hits = periods.iter().filter(|p| p.contains(q)).count();
        if hits != 1 {
            return Err(Error::config(format!(
                "test quarter {q} matched {hits} periods; periods must partition the sample"
            )));
        }
    }

    let mut rows = Vec::with_capacity(periods.len());
    for period in periods {
        let idx: Vec<usize> = result
            .keys
            .iter()
            .enumerate()
            .filter(|(_, k)| period.contains(result.quarters[k.quarter_pos as usize]))
            .map(|(i, _)| i)
            .collect();
        let targets: Vec<f64> = idx.iter().map(|&i| result.targets[i]).collect();
        let mut per_spec = Vec::with_capacity(result.predictions.len());
        for preds in &result.predictions {
            let p: Vec<f64> = idx.iter().map(|&i| preds[i]).collect();
            per_spec.push(if p.len() >= 2 { Some(evaluate_metrics(&p, &targets)?) } else { None });
        }
        let improvement_pp = match (per_spec.first(), per_spec.get(2)) {
            (Some(Some(trad)), Some(Some(comb))) => match (trad.r2, comb.r2) {
                (Some(a), Some(b)) => Some((b - a) * 100.0),
                _ => None,
            },
            _ => None,
        };
        rows.push(PeriodRow {
            name: period.name.clone(),
            start: period.start,
            end: period.end,
            per_spec,
            improvement_pp,
            n: idx.len(),
        });
    }
    Ok(PeriodBreakdown { rows })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YearStats {
    pub year: i32,
    pub quarters: usize,
    /// Mean quarterly density.
    pub density: f64,
    /// Mean quarterly edge count.
    pub edges: f64,
    /// Mean quarterly average path length over quarters where defined.
    pub avg_path_length: Option<f64>,
    /// Mean quarterly mean clustering.
    pub mean_clustering: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChangeRow {
    pub density_pct: Option<f64>,
    pub edges_pct: Option<f64>,
    pub avg_path_length_pct: Option<f64>,
    pub mean_clustering_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndustryVolume {
    pub code: String,
    pub name: Option<String>,
    pub category: Option<String>,
    /// (incoming + outgoing) / 2 flow total over the whole sample, GBP.
    pub total_gbp: f64,
    pub share: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub years: Vec<YearStats>,
    /// First-to-last year percent changes.
    pub change: Option<ChangeRow>,
    /// All industries sorted by volume, largest first.
    pub volumes: Vec<IndustryVolume>,
}

/// Yearly structure statistics (means of quarterly metrics) plus
/// whole-sample industry volume shares.
pub fn evolution_summary(graphs: &[QuarterlyGraph], roster: &IndustryRoster) -> Result<EvolutionSummary> {
    if graphs.is_empty() {
        return Err(Error::data("evolution summary needs at least one quarterly graph"));
    }
    let mut by_year: BTreeMap<i32, Vec<&QuarterlyGraph>> = BTreeMap::new();
    for g in graphs {
        by_year.entry(g.quarter.year()).or_default().push(g);
    }

    let mut years = Vec::with_capacity(by_year.len());
    for (&year, gs) in &by_year {
        let k = gs.len() as f64;
        let density = gs.iter().map(|g| network_density(g)).sum::<f64>() / k;
        let edges = gs.iter().map(|g| g.edge_count() as f64).sum::<f64>() / k;
        let apls: Vec<f64> = gs.iter().filter_map(|g| average_path_length(g).0).collect();
        let avg_path_length = if apls.is_empty() {
            None
        } else {
            Some(apls.iter().sum::<f64>() / apls.len() as f64)
        };
        let mean_clustering = gs
            .iter()
            .map(|g| {
                let c = clustering_coefficient(g);
                c.iter().sum::<f64>() / g.n() as f64
            })
            .sum::<f64>()
            / k;
        years.push(YearStats {
            year,
            quarters: gs.len(),
            density,
            edges,
            avg_path_length,
            mean_clustering,
        });
    }

    let change = if years.len() >= 2 {
        let first = &years[0];
        let last = &years[years.len() - 1];
        let pct = |a: f64, b: f64| if a == 0.0 { None } else { Some((b - a) / a * 100.0) };
        Some(ChangeRow {
            density_pct: pct(first.density, last.density),
            edges_pct: pct(first.edges, last.edges),
            avg_path_length_pct: match (first.avg_path_length, last.avg_path_length) {
                (Some(a), Some(b)) => pct(a, b),
                _ => None,
            },
            mean_clustering_pct: pct(first.mean_clustering, last.mean_clustering),
        })
    } else {
        None
    };

    let n = roster.len();
    let mut volume = vec![0.0f64; n];
    for g in graphs {
        if g.n() != n {
            return Err(Error::data("graph node count does not match roster"));
        }
        for (i, (inc, out)) in strength_centrality(g).into_iter().enumerate() {
            volume[i] += (inc + out) / 2.0;
        }
    }
    let mut grand_terms: Vec<f64> = volume.iter().copied().filter(|v| *v != 0.0).collect();
    let grand = stable_sum(&mut grand_terms);
    let mut volumes: Vec<IndustryVolume> = (0..n)
        .map(|i| {
            let e = roster.entry(i);
            IndustryVolume {
                code: e.code.clone(),
                name: e.name.clone(),
                category: e.category.clone(),
                total_gbp: volume[i],
                share: if grand > 0.0 { volume[i] / grand } else { 0.0 },
            }
        })
        .collect();
    volumes.sort_by(|a, b| b.total_gbp.total_cmp(&a.total_gbp).then(a.code.cmp(&b.code)));

    Ok(EvolutionSummary { years, change, volumes })
}
