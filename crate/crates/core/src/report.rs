//! Evaluation report assembly and rendering (Markdown plus one CSV per
//! table). Rendering is pure string formatting with fixed precision, so a
//! given report always produces identical bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{
    DmOutcome, EvolutionSummary, ExcludedWindow, PeriodBreakdown, SpecOutcome,
};
use crate::model::MetricSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub dataset_hash: String,
    pub model: String,
    pub winsor_clip: f64,
    pub clamped_growth_observations: usize,
    pub quarters: usize,
    pub rows: usize,
    pub dropped_missing_lag1: usize,
    pub dropped_missing_lag2: usize,
    pub rejected_lines: usize,
}

/// The full machine-readable report; everything the rendered tables show.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub meta: RunMeta,
    pub specs: Vec<SpecOutcome>,
    pub dm_traditional_vs_combined: DmOutcome,
    pub excluded_windows: Vec<ExcludedWindow>,
    pub periods: PeriodBreakdown,
    pub evolution: EvolutionSummary,
}

const REPORT_FORMAT: &str = "paynet-report";
const REPORT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    format: String,
    version: u32,
    report: EvaluationReport,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ReportFile {
            format: REPORT_FORMAT.to_string(),
            version: REPORT_VERSION,
            report: self.clone(),
        })
        .expect("report serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ReportFile =
            serde_json::from_str(json).map_err(|e| Error::data(format!("bad report file: {e}")))?;
        if file.format != REPORT_FORMAT || file.version != REPORT_VERSION {
            return Err(Error::data(format!(
                "unsupported report file ({} v{})",
                file.format, file.version
            )));
        }
        Ok(file.report)
    }

    pub fn stamp(&self) -> String {
        crate::export::stamp(&self.meta.config_hash, self.meta.seed)
    }

    pub fn to_markdown(&self) -> String {
        let meta = &self.meta;
        let mut md = String::new();
        md.push_str("# Inter-industry payment network forecasting report\n\n");
        md.push_str(&format!("- config_hash: `{}`\n", meta.config_hash));
        md.push_str(&format!("- seed: `{}`\n", meta.seed));
        md.push_str(&format!("- dataset_hash: `{}`\n", meta.dataset_hash));
        md.push_str(&format!("- model: {}\n", meta.model));
        md.push_str(&format!(
            "- winsorization: growth clamped to ±{:.0}% ({} observations touched)\n",
            meta.winsor_clip * 100.0,
            meta.clamped_growth_observations
        ));
        md.push_str(&format!(
            "- sample: {} quarters, {} dataset rows (dropped for missing lag1: {}, lag2: {}; rejected input lines: {})\n\n",
            meta.quarters, meta.rows, meta.dropped_missing_lag1, meta.dropped_missing_lag2,
            meta.rejected_lines
        ));

        md.push_str("## Top industries by payment volume\n\n");
        md.push_str("| Rank | Industry | Volume (GBP bn) | Share (%) |\n");
        md.push_str("|---:|---|---:|---:|\n");
        let mut top_total = 0.0;
        let mut top_share = 0.0;
        for (rank, v) in self.evolution.volumes.iter().take(10).enumerate() {
            let label = match &v.name {
                Some(name) => format!("{} ({})", name, v.code),
                None => v.code.clone(),
            };
            md.push_str(&format!(
                "| {} | {} | {:.2} | {:.1} |\n",
                rank + 1,
                label,
                v.total_gbp / 1.0e9,
                v.share * 100.0
            ));
            top_total += v.total_gbp;
            top_share += v.share;
        }
        md.push_str(&format!(
            "| | **Top 10 total** | **{:.2}** | **{:.1}** |\n\n",
            top_total / 1.0e9,
            top_share * 100.0
        ));

        md.push_str("## Forecasting performance comparison\n\n");
        md.push_str("| Feature Set | R² | RMSE (%) | MAE (%) | vs. Traditional |\n");
        md.push_str("|---|---:|---:|---:|---:|\n");
        for s in &self.specs {
            md.push_str(&format!(
                "| {} | {} | {:.2} | {:.2} | {} |\n",
                s.spec.label(),
                fmt_r2_pm(&s.pooled, s.window_r2_std),
                s.pooled.rmse_pct,
                s.pooled.mae_pct,
                match s.improvement_pp {
                    None => "Baseline".to_string(),
                    Some(pp) => format!("{pp:+.1} pp"),
                }
            ));
        }
        md.push('\n');
        md.push_str(&format!(
            "Diebold-Mariano, traditional vs combined: {}\n\n",
            fmt_dm(&self.dm_traditional_vs_combined)
        ));

        md.push_str("## Performance by economic period\n\n");
        md.push_str("| Period | Traditional R² | Combined R² | Improvement | n |\n");
        md.push_str("|---|---:|---:|---:|---:|\n");
        for row in &self.periods.rows {
            let r2 = |idx: usize| -> String {
                row.per_spec
                    .get(idx)
                    .and_then(|m| m.as_ref())
                    .and_then(|m| m.r2)
                    .map(|r| format!("{r:.3}"))
                    .unwrap_or_else(|| "—".to_string())
            };
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                row.name,
                r2(0),
                r2(2),
                row.improvement_pp
                    .map(|pp| format!("{pp:+.1} pp"))
                    .unwrap_or_else(|| "—".to_string()),
                row.n
            ));
        }
        md.push('\n');

        md.push_str("## Network structure evolution\n\n");
        md.push_str("| Year | Density | Edges | Avg Path Length | Clustering |\n");
        md.push_str("|---|---:|---:|---:|---:|\n");
        for y in &self.evolution.years {
            md.push_str(&format!(
                "| {} | {:.3} | {:.0} | {} | {:.2} |\n",
                y.year,
                y.density,
                y.edges,
                y.avg_path_length.map(|v| format!("{v:.2}")).unwrap_or_else(|| "—".to_string()),
                y.mean_clustering
            ));
        }
        if let Some(change) = &self.evolution.change {
            let pct = |v: Option<f64>| {
                v.map(|p| format!("{p:+.1}%")).unwrap_or_else(|| "—".to_string())
            };
            md.push_str(&format!(
                "| *Change first-to-last* | {} | {} | {} | {} |\n",
                pct(change.density_pct),
                pct(change.edges_pct),
                pct(change.avg_path_length_pct),
                pct(change.mean_clustering_pct)
            ));
        }
        md.push('\n');

        if !self.excluded_windows.is_empty() {
            md.push_str("## Excluded windows\n\n");
            md.push_str("| Train quarters | Test quarter | Test rows |\n|---:|---|---:|\n");
            for x in &self.excluded_windows {
                md.push_str(&format!(
                    "| 1..{} | {} | {} |\n",
                    x.train_end, x.test_quarter, x.test_rows
                ));
            }
            md.push('\n');
        }
        md
    }

    pub fn volumes_csv(&self) -> String {
        let mut out = self.stamp();
        out.push_str("rank,code,name,category,volume_gbp,share_pct\n");
        for (rank, v) in self.evolution.volumes.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{:.2},{:.4}\n",
                rank + 1,
                v.code,
                v.name.as_deref().unwrap_or(""),
                v.category.as_deref().unwrap_or(""),
                v.total_gbp,
                v.share * 100.0
            ));
        }
        out
    }

    pub fn models_csv(&self) -> String {
        let mut out = self.stamp();
        out.push_str("spec,r2,r2_window_sd,rmse_pct,mae_pct,vs_traditional_pp,n\n");
        for s in &self.specs {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{},{}\n",
                s.spec.label(),
                s.pooled.r2.map(|r| format!("{r:.4}")).unwrap_or_default(),
                s.window_r2_std.map(|r| format!("{r:.4}")).unwrap_or_default(),
                s.pooled.rmse_pct,
                s.pooled.mae_pct,
                s.improvement_pp.map(|p| format!("{p:.4}")).unwrap_or_default(),
                s.pooled.n
            ));
        }
        match &self.dm_traditional_vs_combined {
            DmOutcome::Statistic { dm, p_value, n } => {
                out.push_str(&format!("diebold_mariano,{dm:.4},,{p_value:.6},,,{n}\n"));
            }
            DmOutcome::Indistinguishable { n } => {
                out.push_str(&format!("diebold_mariano,indistinguishable,,,,,{n}\n"));
            }
        }
        out
    }

    pub fn periods_csv(&self) -> String {
        let mut out = self.stamp();
        out.push_str("period,start,end,n,traditional_r2,network_r2,combined_r2,improvement_pp\n");
        for row in &self.periods.rows {
            let r2 = |idx: usize| -> String {
                row.per_spec
                    .get(idx)
                    .and_then(|m| m.as_ref())
                    .and_then(|m: &MetricSet| m.r2)
                    .map(|r| format!("{r:.4}"))
                    .unwrap_or_default()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.name,
                row.start,
                row.end,
                row.n,
                r2(0),
                r2(1),
                r2(2),
                row.improvement_pp.map(|p| format!("{p:.4}")).unwrap_or_default()
            ));
        }
        out
    }

    pub fn evolution_csv(&self) -> String {
        let mut out = self.stamp();
        out.push_str("year,quarters,density,edges,avg_path_length,mean_clustering\n");
        for y in &self.evolution.years {
            out.push_str(&format!(
                "{},{},{:.6},{:.2},{},{:.6}\n",
                y.year,
                y.quarters,
                y.density,
                y.edges,
                y.avg_path_length.map(|v| format!("{v:.6}")).unwrap_or_default(),
                y.mean_clustering
            ));
        }
        if let Some(c) = &self.evolution.change {
            let pct = |v: Option<f64>| v.map(|p| format!("{p:.4}")).unwrap_or_default();
            out.push_str(&format!(
                "change_pct,,{},{},{},{}\n",
                pct(c.density_pct),
                pct(c.edges_pct),
                pct(c.avg_path_length_pct),
                pct(c.mean_clustering_pct)
            ));
        }
        out
    }
}

fn fmt_r2_pm(pooled: &MetricSet, sd: Option<f64>) -> String {
    match (pooled.r2, sd) {
        (Some(r2), Some(sd)) => format!("{r2:.3} ± {sd:.3}"),
        (Some(r2), None) => format!("{r2:.3}"),
        (None, _) => "—".to_string(),
    }
}

fn fmt_dm(dm: &DmOutcome) -> String {
    match dm {
        DmOutcome::Statistic { dm, p_value, n } => {
            format!("DM = {dm:.2}, p = {p_value:.4} (n = {n})")
        }
        DmOutcome::Indistinguishable { n } => {
            format!("models indistinguishable under squared error (n = {n})")
        }
    }
}
