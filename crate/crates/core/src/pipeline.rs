//! End-to-end orchestration: records in, graphs, features, dataset,
//! expanding-window experiment, and report artifacts out.
//!
//! Errors carry the failing stage name in their message; the CLI surfaces
//! it and drops a FAILED marker next to whatever partial artifacts were
//! already flushed.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{RosterSource, RunConfig};
use crate::dataset::{assemble, growth_rates, ForecastDataset};
use crate::error::{Error, Result};
use crate::evaluate::{evolution_summary, period_breakdown, run_experiment, ExperimentResult};
use crate::export;
use crate::features::{extract_features_batch, FeatureTable};
use crate::graph::{build_graph, two_hop, QuarterlyGraph, SquareMatrix};
use crate::ingest::{
    aggregate_quarterly, parse_records, records_to_csv, PaymentRecord, ParseOptions, RosterPolicy,
};
use crate::quarter::Quarter;
use crate::report::{EvaluationReport, RunMeta};
use crate::roster::IndustryRoster;
use crate::synth::synth_generate_detailed;

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("[{name}] {m}")),
        Error::Data(m) => Error::Data(format!("[{name}] {m}")),
        Error::Io(e) => Error::Data(format!("[{name}] io error: {e}")),
        Error::Internal(m) => Error::Internal(format!("[{name}] {m}")),
    })
}

/// Records plus provenance, either parsed from disk or generated.
pub struct SourcedRecords {
    pub records: Vec<PaymentRecord>,
    pub roster: IndustryRoster,
    pub rejected_lines: usize,
    pub synthetic: bool,
}

pub fn obtain_records(cfg: &RunConfig) -> Result<SourcedRecords> {
    match &cfg.paths.input_csv {
        Some(path) => stage("ingest", read_records(cfg, path)),
        None => stage("synth", {
            synth_generate_detailed(&cfg.synth, cfg.seed).map(|out| SourcedRecords {
                records: out.records,
                roster: out.roster,
                rejected_lines: 0,
                synthetic: true,
            })
        }),
    }
}

fn read_records(cfg: &RunConfig, path: &Path) -> Result<SourcedRecords> {
    let policy = match cfg.roster.source {
        RosterSource::Infer => RosterPolicy::Infer,
        RosterSource::File => {
            let roster_path = cfg.roster.file.as_ref().ok_or_else(|| {
                Error::config("roster.source = \"file\" needs roster.file".to_string())
            })?;
            RosterPolicy::Fixed(IndustryRoster::from_csv_path(roster_path)?)
        }
    };
    let opts = ParseOptions {
        period_range: match (cfg.ingest.start, cfg.ingest.end) {
            (Some(s), Some(e)) => Some((
                crate::quarter::YearMonth::new(s.year(), s.first_month())?,
                crate::quarter::YearMonth::new(e.year(), e.first_month() + 2)?,
            )),
            _ => None,
        },
    };
    let file = File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let outcome = parse_records(file, policy, &opts)?;
    Ok(SourcedRecords {
        records: outcome.records,
        roster: outcome.roster,
        rejected_lines: outcome.rejects.len(),
        synthetic: false,
    })
}

/// Everything the run produced, for callers that want the in-memory
/// results as well as the files.
pub struct RunOutput {
    pub report: EvaluationReport,
    pub experiment: ExperimentResult,
    pub dataset: ForecastDataset,
    pub graphs: Vec<QuarterlyGraph>,
    pub roster: IndustryRoster,
}

/// Full pipeline; when `out_dir` is `Some` every artifact is written under
/// it.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    let config_hash = cfg.hash();
    let stamp = export::stamp(&config_hash, cfg.seed);
    crate::exec::configure_threads(cfg.jobs);

    let sourced = obtain_records(cfg)?;
    if let (Some(dir), true) = (out_dir, sourced.synthetic) {
        stage("emit", export::write_text(&dir.join("records.csv"), &{
            let mut s = stamp.clone();
            s.push_str(&records_to_csv(&sourced.records));
            s
        }))?;
        stage("emit", export::write_text(&dir.join("roster.csv"), &{
            let mut s = stamp.clone();
            s.push_str(&sourced.roster.to_csv_string());
            s
        }))?;
    }

    let totals_map = stage(
        "aggregate",
        aggregate_quarterly(&sourced.records, &sourced.roster, cfg.ingest.self_flows),
    )?;
    if totals_map.is_empty() {
        return stage("aggregate", Err(Error::data("no records to aggregate".to_string())));
    }
    let totals: Vec<_> = totals_map.into_values().collect();

    let graphs = stage("graphs", build_all_graphs(&totals, &sourced.roster))?;
    if let Some(dir) = out_dir {
        for g in &graphs {
            stage(
                "emit",
                export::write_text(
                    &dir.join(export::matrix_csv_filename(g)),
                    &export::matrix_csv(g, &sourced.roster, &stamp),
                ),
            )?;
        }
        for (year, adj) in export::yearly_mean_graphs(&graphs) {
            stage(
                "emit",
                export::write_text(
                    &dir.join(format!("network_{year}.dot")),
                    &export::dot_snapshot(year, &adj, &sourced.roster, &stamp),
                ),
            )?;
        }
    }

    let feature_opts = cfg.feature_options();
    let tables = extract_features_batch(&graphs, &feature_opts);
    let hops: Vec<SquareMatrix> = crate::exec::map_indexed(graphs.len(), |i| {
        two_hop(&graphs[i], cfg.features.two_hop_normalized)
    });
    if let Some(dir) = out_dir {
        stage(
            "emit",
            export::write_text(
                &dir.join("features_nodes.csv"),
                &export::node_features_csv(&tables, &sourced.roster, &stamp),
            ),
        )?;
        stage(
            "emit",
            export::write_text(
                &dir.join("features_global.csv"),
                &export::global_features_csv(&tables, &stamp),
            ),
        )?;
    }

    let growth = stage("growth", growth_rates(&totals, cfg.ingest.winsor_clip))?;

    let quarters: Vec<Quarter> = totals.iter().map(|t| t.quarter).collect();
    let dataset = stage(
        "dataset",
        assemble(&quarters, &tables, &hops, &growth, &sourced.roster, &cfg.assemble_options()),
    )?;
    let dataset_csv = export::dataset_csv(&dataset, &sourced.roster, &stamp);
    let dataset_hash: String = {
        let digest = Sha256::digest(dataset_csv.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    };
    if let Some(dir) = out_dir {
        stage("emit", export::write_text(&dir.join("dataset.csv"), &dataset_csv))?;
        let schema = export::DatasetSchemaFile {
            config_hash: config_hash.clone(),
            seed: cfg.seed,
            rows: dataset.n_rows(),
            winsor_clip: growth.clip,
            clamped_growth_observations: growth.clamped,
            dropped_missing_lag1: dataset.dropped_missing_lag1,
            dropped_missing_lag2: dataset.dropped_missing_lag2,
            columns: dataset.schema.clone(),
        };
        stage(
            "emit",
            export::write_text(
                &dir.join("dataset.schema.json"),
                &serde_json::to_string_pretty(&schema).expect("schema serialization"),
            ),
        )?;
    }

    let experiment = stage("evaluate", run_experiment(&dataset, &cfg.experiment_config()))?;
    let periods = stage("report", period_breakdown(&experiment, &cfg.periods))?;
    let evolution = stage("report", evolution_summary(&graphs, &sourced.roster))?;

    let report = EvaluationReport {
        meta: RunMeta {
            config_hash,
            seed: cfg.seed,
            dataset_hash,
            model: cfg.model_summary(),
            winsor_clip: growth.clip,
            clamped_growth_observations: growth.clamped,
            quarters: quarters.len(),
            rows: dataset.n_rows(),
            dropped_missing_lag1: dataset.dropped_missing_lag1,
            dropped_missing_lag2: dataset.dropped_missing_lag2,
            rejected_lines: sourced.rejected_lines,
        },
        specs: experiment.specs.clone(),
        dm_traditional_vs_combined: experiment.dm_traditional_vs_combined.clone(),
        excluded_windows: experiment.excluded.clone(),
        periods,
        evolution,
    };
    if let Some(dir) = out_dir {
        stage("emit", write_report_files(dir, &report))?;
    }

    Ok(RunOutput { report, experiment, dataset, graphs, roster: sourced.roster })
}

fn build_all_graphs(
    totals: &[crate::ingest::PairTotals],
    roster: &IndustryRoster,
) -> Result<Vec<QuarterlyGraph>> {
    totals.iter().map(|t| build_graph(t, roster)).collect()
}

/// Renders and writes report.md, report.json and the per-table CSVs.
pub fn write_report_files(dir: &Path, report: &EvaluationReport) -> Result<()> {
    export::write_text(&dir.join("report.md"), &report.to_markdown())?;
    export::write_text(&dir.join("report.json"), &report.to_json())?;
    export::write_text(&dir.join("table1_volumes.csv"), &report.volumes_csv())?;
    export::write_text(&dir.join("table2_models.csv"), &report.models_csv())?;
    export::write_text(&dir.join("table3_periods.csv"), &report.periods_csv())?;
    export::write_text(&dir.join("table4_evolution.csv"), &report.evolution_csv())?;
    Ok(())
}

/// Summary of a features-only invocation.
pub struct FeaturesOutput {
    pub quarters: usize,
    pub records: usize,
    pub rejected_lines: usize,
}

/// The features subcommand pipeline: ingest, graphs, feature extraction,
/// snapshot exports. An input with zero data lines succeeds with empty
/// tables; an input where every line was rejected is a data error.
pub fn run_features(cfg: &RunConfig, out_dir: &Path) -> Result<FeaturesOutput> {
    let config_hash = cfg.hash();
    let stamp = export::stamp(&config_hash, cfg.seed);
    crate::exec::configure_threads(cfg.jobs);

    let sourced = obtain_records(cfg)?;
    if sourced.records.is_empty() && sourced.rejected_lines > 0 {
        return stage(
            "ingest",
            Err(Error::data(format!(
                "all {} data lines were rejected",
                sourced.rejected_lines
            ))),
        );
    }

    let totals_map = stage(
        "aggregate",
        aggregate_quarterly(&sourced.records, &sourced.roster, cfg.ingest.self_flows),
    )?;
    let totals: Vec<_> = totals_map.into_values().collect();
    let graphs = stage("graphs", build_all_graphs(&totals, &sourced.roster))?;
    let tables: Vec<FeatureTable> = extract_features_batch(&graphs, &cfg.feature_options());

    stage(
        "emit",
        export::write_text(
            &out_dir.join("features_nodes.csv"),
            &export::node_features_csv(&tables, &sourced.roster, &stamp),
        ),
    )?;
    stage(
        "emit",
        export::write_text(
            &out_dir.join("features_global.csv"),
            &export::global_features_csv(&tables, &stamp),
        ),
    )?;
    for g in &graphs {
        stage(
            "emit",
            export::write_text(
                &out_dir.join(export::matrix_csv_filename(g)),
                &export::matrix_csv(g, &sourced.roster, &stamp),
            ),
        )?;
    }
    for (year, adj) in export::yearly_mean_graphs(&graphs) {
        stage(
            "emit",
            export::write_text(
                &out_dir.join(format!("network_{year}.dot")),
                &export::dot_snapshot(year, &adj, &sourced.roster, &stamp),
            ),
        )?;
    }

    Ok(FeaturesOutput {
        quarters: graphs.len(),
        records: sourced.records.len(),
        rejected_lines: sourced.rejected_lines,
    })
}

/// The synth subcommand: generate records and write records.csv plus
/// roster.csv.
pub fn run_synth(cfg: &RunConfig, out_dir: &Path) -> Result<usize> {
    let stamp = export::stamp(&cfg.hash(), cfg.seed);
    let out = stage("synth", synth_generate_detailed(&cfg.synth, cfg.seed))?;
    let mut csv = stamp.clone();
    csv.push_str(&records_to_csv(&out.records));
    stage("emit", export::write_text(&out_dir.join("records.csv"), &csv))?;
    let mut roster_csv = stamp;
    roster_csv.push_str(&out.roster.to_csv_string());
    stage("emit", export::write_text(&out_dir.join("roster.csv"), &roster_csv))?;
    Ok(out.records.len())
}

/// Window metadata grouped for quick inspection.
pub fn quarter_axis(totals: &BTreeMap<Quarter, crate::ingest::PairTotals>) -> Vec<Quarter> {
    totals.keys().copied().collect()
}
