//! `paynet`: batch pipeline driver for quarterly inter-industry payment
//! network analysis.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use paynet_core::config::RunConfig;
use paynet_core::error::Error;
use paynet_core::evaluate::{diebold_mariano, DmOutcome, DmVariance};
use paynet_core::export::write_text;
use paynet_core::pipeline;
use paynet_core::report::EvaluationReport;

#[derive(Parser)]
#[command(name = "paynet", version, about = "Quarterly payment-network analytics pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic payment records (records.csv + roster.csv).
    Synth {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of industry sectors.
        #[arg(long)]
        sectors: Option<usize>,
        /// First quarter, e.g. 2017Q1.
        #[arg(long)]
        start: Option<String>,
        /// Last quarter, e.g. 2024Q4.
        #[arg(long)]
        end: Option<String>,
        /// Target edge density in (0, 1].
        #[arg(long)]
        density: Option<f64>,
    },
    /// Extract per-quarter features, matrix dumps and DOT snapshots.
    Features {
        #[command(flatten)]
        common: CommonOpts,
        /// Input record CSV (header `date,source,dest,value`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Roster CSV (`code,name,category`); inferred from data when
        /// omitted.
        #[arg(long)]
        roster: Option<PathBuf>,
        /// Use 1/w edge lengths for betweenness.
        #[arg(long)]
        weighted_betweenness: bool,
        /// Keep intra-industry flows.
        #[arg(long)]
        keep_self_flows: bool,
    },
    /// Full experiment: ingest (or synthesize), features, dataset,
    /// expanding-window evaluation, reports.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Input record CSV; synthetic generation when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Roster CSV for fixed-roster ingestion.
        #[arg(long)]
        roster: Option<PathBuf>,
        /// Serialize the final window's three fitted models.
        #[arg(long)]
        save_models: bool,
    },
    /// Diebold-Mariano test on a CSV of paired forecast errors (`e1,e2`).
    Dm {
        /// CSV file with header `e1,e2`; `#` lines are skipped.
        #[arg(long)]
        errors: PathBuf,
        /// Bartlett-kernel HAC variance with this lag instead of the plain
        /// sample variance.
        #[arg(long)]
        hac_lag: Option<usize>,
    },
    /// Re-render report.md and the table CSVs from a report.json.
    Report {
        /// Machine-readable report produced by `run`.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Data(_) | Error::Io(_) => 2,
        Error::Internal(_) => 3,
    }
}

fn load_config(common: &CommonOpts) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.paths.out_dir = out.clone();
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = Some(jobs);
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { common, sectors, start, end, density } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = sectors {
                cfg.synth.sectors = s;
            }
            if let Some(s) = &start {
                cfg.synth.start = s.parse()?;
            }
            if let Some(e) = &end {
                cfg.synth.end = e.parse()?;
            }
            if let Some(d) = density {
                cfg.synth.density = d;
            }
            let out_dir = cfg.paths.out_dir.clone();
            let n = pipeline::run_synth(&cfg, &out_dir)?;
            println!(
                "wrote {} records for {} sectors x {} quarters to {}",
                n,
                cfg.synth.sectors,
                cfg.synth.quarters().len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Features { common, input, roster, weighted_betweenness, keep_self_flows } => {
            let mut cfg = load_config(&common)?;
            apply_input(&mut cfg, input, roster);
            if weighted_betweenness {
                cfg.features.weighted_betweenness = true;
            }
            if keep_self_flows {
                cfg.ingest.self_flows = paynet_core::ingest::SelfFlowPolicy::Keep;
            }
            let out_dir = cfg.paths.out_dir.clone();
            let summary = pipeline::run_features(&cfg, &out_dir)?;
            if summary.records == 0 {
                eprintln!("warning: input contained no data lines; feature tables are empty");
            } else if summary.rejected_lines > 0 {
                eprintln!(
                    "warning: {} line(s) rejected, {} record(s) accepted",
                    summary.rejected_lines, summary.records
                );
            }
            println!(
                "features for {} quarter(s) written to {}",
                summary.quarters,
                out_dir.display()
            );
            Ok(())
        }
        Command::Run { common, input, roster, save_models } => {
            let mut cfg = load_config(&common)?;
            apply_input(&mut cfg, input, roster);
            let out_dir = cfg.paths.out_dir.clone();
            match run_with_marker(&cfg, &out_dir, save_models) {
                Ok(report) => {
                    print_summary(&report);
                    println!("artifacts written to {}", out_dir.display());
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
        Command::Dm { errors, hac_lag } => cmd_dm(&errors, hac_lag),
        Command::Report { from, out } => {
            let text = std::fs::read_to_string(&from)
                .map_err(|e| Error::data(format!("cannot read {}: {e}", from.display())))?;
            let report = EvaluationReport::from_json(&text)?;
            pipeline::write_report_files(&out, &report)?;
            println!("report rendered to {}", out.display());
            Ok(())
        }
    }
}

fn apply_input(cfg: &mut RunConfig, input: Option<PathBuf>, roster: Option<PathBuf>) {
    if let Some(input) = input {
        cfg.paths.input_csv = Some(input);
    }
    if let Some(roster) = roster {
        cfg.roster.source = paynet_core::config::RosterSource::File;
        cfg.roster.file = Some(roster);
    }
}

/// Runs the full pipeline; on failure flushes a FAILED marker naming the
/// stage next to whatever artifacts were already written.
fn run_with_marker(
    cfg: &RunConfig,
    out_dir: &Path,
    save_models: bool,
) -> Result<EvaluationReport, Error> {
    match pipeline::run(cfg, Some(out_dir)) {
        Ok(output) => {
            let _ = std::fs::remove_file(out_dir.join("FAILED"));
            if save_models {
                save_final_models(cfg, &output, out_dir)?;
            }
            Ok(output.report)
        }
        Err(e) => {
            let marker = format!("{e}\n");
            let _ = write_text(&out_dir.join("FAILED"), &marker);
            Err(e)
        }
    }
}

/// Refits the three specifications on the last window's training set and
/// serializes them.
fn save_final_models(
    cfg: &RunConfig,
    output: &pipeline::RunOutput,
    out_dir: &Path,
) -> Result<(), Error> {
    use paynet_core::dataset::SpecKind;
    use paynet_core::model::model_to_json;
    use paynet_core::numeric::derive_seed;

    let dataset = &output.dataset;
    let t_count = dataset.quarters.len();
    let windows = paynet_core::dataset::expanding_windows(t_count, cfg.dataset.min_train)?;
    let Some(last) = windows.last() else { return Ok(()) };
    let train_rows = 0..dataset.rows_before_quarter(last.train_end as u32);
    let model_choice = cfg.model_choice();
    for (s, spec) in SpecKind::ALL.iter().enumerate() {
        let train = dataset.view(*spec, train_rows.clone());
        let seed = derive_seed(cfg.seed, ((windows.len() - 1) * SpecKind::ALL.len() + s) as u64);
        let model = match &model_choice {
            paynet_core::evaluate::ModelChoice::Forest(p) => paynet_core::model::fit_forest(
                &train,
                dataset.targets_for(train_rows.clone()),
                &paynet_core::model::ForestParams { seed, ..p.clone() },
            )?,
            paynet_core::evaluate::ModelChoice::Boosted(p) => paynet_core::model::fit_boosted(
                &train,
                dataset.targets_for(train_rows.clone()),
                &paynet_core::model::BoostParams { seed, ..p.clone() },
            )?,
        };
        let name = match spec {
            SpecKind::Traditional => "model_traditional.json",
            SpecKind::Network => "model_network.json",
            SpecKind::Combined => "model_combined.json",
        };
        write_text(&out_dir.join(name), &model_to_json(&model))?;
    }
    Ok(())
}

fn cmd_dm(path: &Path, hac_lag: Option<usize>) -> Result<(), Error> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let headers = rdr.headers().map_err(|e| Error::data(format!("bad csv: {e}")))?.clone();
    let col = |name: &str| -> Result<usize, Error> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::data(format!("errors csv needs column `{name}`")))
    };
    let (c1, c2) = (col("e1")?, col("e2")?);
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(format!("bad csv: {e}")))?;
        let parse = |i: usize| -> Result<f64, Error> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::data(format!("non-numeric error value `{}`", &rec[i])))
        };
        e1.push(parse(c1)?);
        e2.push(parse(c2)?);
    }
    let variance = match hac_lag {
        Some(lag) => DmVariance::Hac { lag },
        None => DmVariance::Plain,
    };
    match diebold_mariano(&e1, &e2, variance)? {
        DmOutcome::Statistic { dm, p_value, n } => {
            println!("DM = {dm:.4}, p = {p_value:.6}, n = {n}");
        }
        DmOutcome::Indistinguishable { n } => {
            println!("models indistinguishable under squared error (n = {n})");
        }
    }
    Ok(())
}

fn print_summary(report: &EvaluationReport) {
    println!(
        "config_hash={} seed={} dataset_hash={}",
        report.meta.config_hash, report.meta.seed, report.meta.dataset_hash
    );
    for s in &report.specs {
        println!(
            "{:35} R2={} RMSE={:.2}% MAE={:.2}% {}",
            s.spec.label(),
            s.pooled.r2.map(|r| format!("{r:.3}")).unwrap_or_else(|| "—".into()),
            s.pooled.rmse_pct,
            s.pooled.mae_pct,
            s.improvement_pp
                .map(|p| format!("({p:+.1} pp vs traditional)"))
                .unwrap_or_default()
        );
    }
    match &report.dm_traditional_vs_combined {
        DmOutcome::Statistic { dm, p_value, .. } => {
            println!("Diebold-Mariano traditional vs combined: DM = {dm:.2}, p = {p_value:.4}");
        }
        DmOutcome::Indistinguishable { .. } => {
            println!("Diebold-Mariano traditional vs combined: indistinguishable");
        }
    }
}
