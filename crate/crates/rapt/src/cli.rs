//! Command-line interface.
//!
//! Every subcommand exits 0 on success; failures print a machine-readable
//! `{"error": <kind>, "message": <text>}` object on stderr and exit nonzero.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rapt_core::{compute_metrics, CaseBase, LabelVocab};

use crate::error::Error;
use crate::harness::{
    self, resolve_strategy, summarize_winrate, ExperimentConfig, ResolvedStrategy, RunReport,
    StrategySpec, WinRateSummary, DEFAULT_FALLBACK_TAU, DEFAULT_K, DEFAULT_N,
};
use crate::records;
use crate::report;
use crate::store;
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rapt",
    version,
    about = "Retrieval-augmented post-hoc thresholding for multi-label classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate labeled records and persist them as a binary case base (.rcb).
    Build {
        /// Line-delimited JSON records with labels.
        #[arg(long)]
        records: PathBuf,
        /// Destination .rcb file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Tune a static threshold on validation records and print it as JSON.
    Tune {
        #[arg(long, value_enum)]
        strategy: TuneKind,
        /// Labeled validation records.
        #[arg(long)]
        val: PathBuf,
        /// Also write the JSON result to a file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Predict label sets for query records with one strategy.
    Predict {
        /// Case base (.rcb); required for avgcount/rankcal.
        #[arg(long)]
        casebase: Option<PathBuf>,
        /// Query records; labels may be absent.
        #[arg(long)]
        queries: PathBuf,
        /// fixed:<tau> | global-opt | labelwise-opt | avgcount | rankcal
        #[arg(long)]
        strategy: String,
        /// Retrieval neighborhood size.
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Neighbors kept during adaptation.
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        /// Rank-calibration fallback threshold.
        #[arg(long, default_value_t = DEFAULT_FALLBACK_TAU)]
        fallback_tau: f64,
        /// Clip adapted scores to [0, 1] before thresholding.
        #[arg(long)]
        clip_adapted: bool,
        /// Labeled validation records; required for tuned strategies.
        #[arg(long)]
        val: Option<PathBuf>,
        /// Destination predictions file (.jsonl).
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a predictions file against ground-truth records.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write the metrics JSON to a file.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write a one-row CSV (fixed header order).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a seeded synthetic benchmark with cluster-level score bias.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        clusters: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        labels: usize,
        #[arg(long, default_value_t = 2000)]
        train: usize,
        #[arg(long, default_value_t = 500)]
        val: usize,
        #[arg(long, default_value_t = 500)]
        test: usize,
        #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
        bias_lo: f64,
        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        bias_hi: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0.75)]
        base_hi: f64,
        #[arg(long, default_value_t = 0.25)]
        base_lo: f64,
        /// Draw an independent bias per (cluster, label).
        #[arg(long)]
        per_label_bias: bool,
        #[arg(long)]
        out_train: PathBuf,
        /// Required when --val > 0.
        #[arg(long)]
        out_val: Option<PathBuf>,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Run a full experiment from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare run reports: win rate of dynamic over static strategies.
    Summarize {
        /// Paths to report.json files.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write the summary as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TuneKind {
    Global,
    Labelwise,
}

pub fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Build { records, output } => build(&records, &output),
        Command::Tune { strategy, val, output } => tune(strategy, &val, output.as_deref()),
        Command::Predict {
            casebase,
            queries,
            strategy,
            k,
            n,
            fallback_tau,
            clip_adapted,
            val,
            output,
        } => predict(
            casebase.as_deref(),
            &queries,
            &strategy,
            k,
            n,
            fallback_tau,
            clip_adapted,
            val.as_deref(),
            &output,
        ),
        Command::Eval { preds, truth, output, csv } => {
            eval(&preds, &truth, output.as_deref(), csv.as_deref())
        }
        Command::Synth {
            seed,
            clusters,
            dim,
            labels,
            train,
            val,
            test,
            bias_lo,
            bias_hi,
            noise,
            base_hi,
            base_lo,
            per_label_bias,
            out_train,
            out_val,
            out_test,
        } => {
            let cfg = SynthConfig {
                n_clusters: clusters,
                dims: dim,
                labels,
                n_train: train,
                n_val: val,
                n_test: test,
                cluster_bias_range: (bias_lo, bias_hi),
                noise_amplitude: noise,
                base_hi,
                base_lo,
                per_label_bias,
                seed,
            };
            run_synth(&cfg, &out_train, out_val.as_deref(), &out_test)
        }
        Command::Run { config } => run(&config),
        Command::Summarize { reports, output } => summarize(&reports, output.as_deref()),
    }
}

fn build(records_path: &std::path::Path, output: &std::path::Path) -> Result<(), Error> {
    let cases = records::to_cases(records::read_records(records_path)?)?;
    let label_count = cases.first().map(|c| c.labels.len()).unwrap_or(1);
    let cb = CaseBase::new(LabelVocab::numbered(label_count)?, cases)?;
    store::save_case_base(&cb, output)?;
    println!("wrote {} cases (d={}, L={}) to {}", cb.len(), cb.dims(), cb.label_count(), output.display());
    Ok(())
}

fn tune(kind: TuneKind, val: &std::path::Path, output: Option<&std::path::Path>) -> Result<(), Error> {
    let spec = match kind {
        TuneKind::Global => StrategySpec::GlobalOpt,
        TuneKind::Labelwise => StrategySpec::LabelwiseOpt,
    };
    let rows = harness::tuning_rows(&records::read_records(val)?)?;
    let tau = match resolve_strategy(&spec, Some(&rows))? {
        ResolvedStrategy::Static(tau) => tau,
        _ => unreachable!("tuned strategies resolve to static thresholds"),
    };
    let json = serde_json::json!({ "strategy": spec.to_string(), "tau": tau });
    let text = serde_json::to_string_pretty(&json).expect("tune serialization");
    println!("{text}");
    if let Some(path) = output {
        fs::write(path, text + "\n").map_err(Error::io(path))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn predict(
    casebase: Option<&std::path::Path>,
    queries: &std::path::Path,
    strategy: &str,
    k: usize,
    n: usize,
    fallback_tau: f64,
    clip_adapted: bool,
    val: Option<&std::path::Path>,
    output: &std::path::Path,
) -> Result<(), Error> {
    let spec: StrategySpec = strategy.parse()?;
    let val_rows = match val {
        Some(path) => Some(harness::tuning_rows(&records::read_records(path)?)?),
        None => None,
    };
    let resolved = resolve_strategy(&spec, val_rows.as_ref())?;
    let query_records = records::read_records(queries)?;

    let cb = match (&resolved, casebase) {
        (ResolvedStrategy::Static(_), _) => None,
        (_, Some(path)) => Some(store::load_case_base(path)?),
        (_, None) => {
            return Err(Error::InvalidConfig(format!(
                "strategy `{spec}` needs --casebase"
            )))
        }
    };

    let mut predictions = Vec::with_capacity(query_records.len());
    for record in &query_records {
        let prediction = match &resolved {
            ResolvedStrategy::Static(tau) => harness::predict_static(record, tau)?,
            dynamic => {
                let cb = cb.as_ref().expect("case base loaded for dynamic strategy");
                let (nb, adapted) =
                    harness::dynamic_context(cb, record, k, n, clip_adapted)?;
                match dynamic {
                    ResolvedStrategy::AvgCount => {
                        rapt_core::avgcount_select(&record.id, &adapted, &nb)?
                    }
                    ResolvedStrategy::RankCal => {
                        rapt_core::rankcal_select(&record.id, &adapted, &nb, fallback_tau)?
                    }
                    ResolvedStrategy::Static(_) => unreachable!(),
                }
            }
        };
        predictions.push(prediction);
    }
    harness::write_predictions(output, &predictions)?;
    println!("wrote {} predictions to {}", predictions.len(), output.display());
    Ok(())
}

fn eval(
    preds: &std::path::Path,
    truth: &std::path::Path,
    output: Option<&std::path::Path>,
    csv: Option<&std::path::Path>,
) -> Result<(), Error> {
    let predictions = harness::read_predictions(preds)?;
    let truth_records = records::read_records(truth)?;
    let (predicted, truths) = harness::align_predictions_to_truth(&predictions, &truth_records)?;
    let metrics = compute_metrics(&predicted, &truths)?;
    let json = report::metrics_json(&metrics);
    println!("{json}");
    if let Some(path) = output {
        fs::write(path, json.clone() + "\n").map_err(Error::io(path))?;
    }
    if let Some(path) = csv {
        let text = format!("{}\n{}\n", report::METRICS_CSV_HEADER, report::metrics_csv_row(&metrics));
        fs::write(path, text).map_err(Error::io(path))?;
    }
    Ok(())
}

fn run_synth(
    cfg: &SynthConfig,
    out_train: &std::path::Path,
    out_val: Option<&std::path::Path>,
    out_test: &std::path::Path,
) -> Result<(), Error> {
    if cfg.n_val > 0 && out_val.is_none() {
        return Err(Error::InvalidConfig("--out-val is required when --val > 0".into()));
    }
    let data = synth::generate(cfg)?;
    records::write_records(out_train, &data.train)?;
    records::write_records(out_test, &data.test)?;
    if let Some(path) = out_val {
        records::write_records(path, &data.val)?;
    }
    println!(
        "generated {} train / {} val / {} test records (seed {})",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        cfg.seed
    );
    Ok(())
}

fn run(config_path: &std::path::Path) -> Result<(), Error> {
    let text = fs::read_to_string(config_path).map_err(Error::io(config_path))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: config_path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let report = harness::run_experiment(&cfg)?;
    print_run_report(&report);
    Ok(())
}

fn print_run_report(report: &RunReport) {
    println!("{:<16} {:>10} {:>10} {:>10}", "strategy", "micro-F1", "macro-F1", "hamming");
    for outcome in &report.outcomes {
        println!(
            "{:<16} {:>10.4} {:>10.4} {:>10.4}",
            outcome.strategy,
            outcome.metrics.micro_f1,
            outcome.metrics.macro_f1,
            outcome.metrics.hamming_loss
        );
    }
    println!("winner: {} ({} ms)", report.winner, report.duration_ms);
    println!("artifacts: {}", report.config.output_dir.display());
}

fn summarize(paths: &[PathBuf], output: Option<&std::path::Path>) -> Result<(), Error> {
    let reports = paths
        .iter()
        .map(|p| harness::load_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize_winrate(&reports)?;
    print_summary(&summary);
    if let Some(path) = output {
        let json = serde_json::to_string_pretty(&summary).expect("summary serialization");
        fs::write(path, json + "\n").map_err(Error::io(path))?;
    }
    Ok(())
}

fn print_summary(summary: &WinRateSummary) {
    println!(
        "{:<24} {:<14} {:>9} {:<14} {:>9} {:>5}",
        "report", "best static", "macro", "best dynamic", "macro", "win"
    );
    for row in &summary.rows {
        println!(
            "{:<24} {:<14} {:>9.4} {:<14} {:>9.4} {:>5}",
            row.label,
            row.best_static,
            row.static_macro_f1,
            row.best_dynamic,
            row.dynamic_macro_f1,
            if row.dynamic_win { "yes" } else { "no" }
        );
    }
    println!(
        "wins: {}/{} ({:.1}%)  mean ΔmacroF1: {:+.4}  mean ΔmicroF1: {:+.4}",
        summary.dynamic_wins,
        summary.n_reports,
        summary.win_rate * 100.0,
        summary.mean_macro_f1_delta,
        summary.mean_micro_f1_delta
    );
}

