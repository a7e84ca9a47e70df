//! Experiment harness: builds the case base, tunes static baselines,
//! predicts with every requested strategy, scores them, and writes the run
//! artifacts. Also the cross-run win-rate comparison.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rapt_core::adaptation::AdaptedScores;
use rapt_core::retrieval::Neighborhood;
use rapt_core::{
    adapt_scores, avgcount_select, rankcal_select, retrieve_top_k_excluding, threshold_select,
    tune_global_threshold, tune_labelwise_thresholds, CaseBase, LabelVocab, MetricsReport,
    Prediction, Tau,
};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::records::{self, Record};
use crate::report;

/// Default retrieval neighborhood size.
pub const DEFAULT_K: usize = 10;
/// Default number of neighbors kept during adaptation.
pub const DEFAULT_N: usize = 3;
/// Default threshold when rank calibration has no contributing neighbor.
pub const DEFAULT_FALLBACK_TAU: f64 = 0.5;

/// A thresholding strategy selector.
///
/// String form (CLI and config files): `fixed:<tau>`, `global-opt`,
/// `labelwise-opt`, `avgcount`, `rankcal`.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    Fixed(f64),
    GlobalOpt,
    LabelwiseOpt,
    AvgCount,
    RankCal,
}

impl StrategySpec {
    /// Retrieval-based strategies that need a case base at query time.
    pub fn is_dynamic(&self) -> bool {
        matches!(self, StrategySpec::AvgCount | StrategySpec::RankCal)
    }

    /// Static strategies whose threshold is fit on validation data.
    pub fn is_tuned(&self) -> bool {
        matches!(self, StrategySpec::GlobalOpt | StrategySpec::LabelwiseOpt)
    }

    /// Filesystem-safe name used for per-strategy artifact files.
    pub fn slug(&self) -> String {
        match self {
            StrategySpec::Fixed(tau) => format!("fixed_{tau}"),
            StrategySpec::GlobalOpt => "global-opt".into(),
            StrategySpec::LabelwiseOpt => "labelwise-opt".into(),
            StrategySpec::AvgCount => "avgcount".into(),
            StrategySpec::RankCal => "rankcal".into(),
        }
    }
}

impl std::fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategySpec::Fixed(tau) => write!(f, "fixed:{tau}"),
            StrategySpec::GlobalOpt => write!(f, "global-opt"),
            StrategySpec::LabelwiseOpt => write!(f, "labelwise-opt"),
            StrategySpec::AvgCount => write!(f, "avgcount"),
            StrategySpec::RankCal => write!(f, "rankcal"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "global-opt" => Ok(StrategySpec::GlobalOpt),
            "labelwise-opt" => Ok(StrategySpec::LabelwiseOpt),
            "avgcount" => Ok(StrategySpec::AvgCount),
            "rankcal" => Ok(StrategySpec::RankCal),
            other => match other.strip_prefix("fixed:") {
                Some(tau) => tau
                    .parse::<f64>()
                    .map(StrategySpec::Fixed)
                    .map_err(|_| Error::UnknownStrategy(s.into())),
                None => Err(Error::UnknownStrategy(s.into())),
            },
        }
    }
}

impl Serialize for StrategySpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategySpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Full experiment description, loadable from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: PathBuf,
    #[serde(default)]
    pub val: Option<PathBuf>,
    pub test: PathBuf,
    pub output_dir: PathBuf,
    pub strategies: Vec<StrategySpec>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub clip_adapted: bool,
    #[serde(default = "default_fallback_tau")]
    pub fallback_tau: f64,
    /// Also retain validation cases into the case base before predicting.
    #[serde(default)]
    pub merge_val_into_casebase: bool,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_fallback_tau() -> f64 {
    DEFAULT_FALLBACK_TAU
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("at least one strategy is required".into()));
        }
        if self.k == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("k and n must be positive".into()));
        }
        if self.n > self.k {
            return Err(Error::InvalidConfig(format!(
                "n ({}) must not exceed k ({})",
                self.n, self.k
            )));
        }
        Ok(())
    }
}

/// Metrics for one strategy, plus its per-query predictions (kept in memory
/// only; prediction files carry them on disk).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: String,
    pub metrics: MetricsReport,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

/// Everything one experiment produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub outcomes: Vec<StrategyOutcome>,
    /// Strategy with the highest macro-F1; ties go to the earlier-listed one.
    pub winner: String,
    pub duration_ms: u64,
}

pub(crate) enum ResolvedStrategy {
    Static(Tau),
    AvgCount,
    RankCal,
}

/// Extracts (scores, labels) rows for tuning; labels are required.
pub(crate) fn tuning_rows(records: &[Record]) -> Result<(Vec<Vec<f32>>, Vec<Vec<u8>>), Error> {
    let mut scores = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for record in records {
        let truth =
            record.labels.as_ref().ok_or_else(|| Error::MissingLabels(record.id.clone()))?;
        scores.push(record.scores.clone());
        labels.push(truth.clone());
    }
    Ok((scores, labels))
}

/// Turns a strategy spec into something applicable per query. Tuned
/// baselines fit on raw validation scores, never on adapted scores.
pub(crate) fn resolve_strategy(
    spec: &StrategySpec,
    val_rows: Option<&(Vec<Vec<f32>>, Vec<Vec<u8>>)>,
) -> Result<ResolvedStrategy, Error> {
    match spec {
        StrategySpec::Fixed(tau) => Ok(ResolvedStrategy::Static(Tau::Scalar(*tau))),
        StrategySpec::GlobalOpt => {
            let (scores, labels) =
                val_rows.ok_or_else(|| Error::MissingValidationSet(spec.to_string()))?;
            Ok(ResolvedStrategy::Static(Tau::Scalar(tune_global_threshold(scores, labels)?)))
        }
        StrategySpec::LabelwiseOpt => {
            let (scores, labels) =
                val_rows.ok_or_else(|| Error::MissingValidationSet(spec.to_string()))?;
            Ok(ResolvedStrategy::Static(Tau::PerLabel(tune_labelwise_thresholds(
                scores, labels,
            )?)))
        }
        StrategySpec::AvgCount => Ok(ResolvedStrategy::AvgCount),
        StrategySpec::RankCal => Ok(ResolvedStrategy::RankCal),
    }
}

/// Retrieval + adaptation shared by the dynamic strategies for one query.
/// The query's own id is excluded from retrieval so a stored query never
/// informs its own prediction.
pub(crate) fn dynamic_context<'a>(
    cb: &'a CaseBase,
    record: &Record,
    k: usize,
    n: usize,
    clip_adapted: bool,
) -> Result<(Neighborhood<'a>, AdaptedScores), Error> {
    let neighborhood = retrieve_top_k_excluding(cb, &record.embedding, k, Some(&record.id))?;
    let mut adapted = adapt_scores(&record.scores, &neighborhood, n)?;
    if clip_adapted {
        for value in &mut adapted.values {
            *value = value.clamp(0.0, 1.0);
        }
    }
    Ok((neighborhood, adapted))
}

pub(crate) fn predict_static(record: &Record, tau: &Tau) -> Result<Prediction, Error> {
    let raw: Vec<f64> = record.scores.iter().map(|&s| s as f64).collect();
    Ok(threshold_select(&record.id, &raw, tau.clone())?)
}

/// Runs the full pipeline described by `cfg` and writes all artifacts to
/// `cfg.output_dir`: `config.json`, `predictions/<strategy>.jsonl`,
/// `metrics/<strategy>.json`, `report.json`, and `summary.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, Error> {
    cfg.validate()?;
    let started = Instant::now();

    let train_cases = records::to_cases(records::read_records(&cfg.train)?)?;
    let label_count = train_cases.first().map(|c| c.labels.len()).unwrap_or(1);
    let mut cb = CaseBase::new(LabelVocab::numbered(label_count)?, train_cases)?;

    let val_records = match &cfg.val {
        Some(path) => Some(records::read_records(path)?),
        None => None,
    };
    if cfg.merge_val_into_casebase {
        let val = val_records
            .as_ref()
            .ok_or_else(|| Error::MissingValidationSet("merge_val_into_casebase".into()))?;
        for case in records::to_cases(val.clone())? {
            cb.retain_case(case)?;
        }
    }

    let val_rows = match (&val_records, cfg.strategies.iter().any(StrategySpec::is_tuned)) {
        (Some(records), true) => Some(tuning_rows(records)?),
        (None, true) => {
            let spec = cfg.strategies.iter().find(|s| s.is_tuned()).expect("tuned present");
            return Err(Error::MissingValidationSet(spec.to_string()));
        }
        _ => None,
    };
    let resolved: Vec<ResolvedStrategy> = cfg
        .strategies
        .iter()
        .map(|spec| resolve_strategy(spec, val_rows.as_ref()))
        .collect::<Result<_, _>>()?;

    let test_records = records::read_records(&cfg.test)?;
    if test_records.is_empty() {
        return Err(rapt_core::Error::EmptyInput.into());
    }
    let needs_dynamic = cfg.strategies.iter().any(StrategySpec::is_dynamic);

    let mut truths: Vec<Vec<u8>> = Vec::with_capacity(test_records.len());
    let mut per_strategy: Vec<Vec<Prediction>> =
        cfg.strategies.iter().map(|_| Vec::with_capacity(test_records.len())).collect();
    for record in &test_records {
        let truth =
            record.labels.clone().ok_or_else(|| Error::MissingLabels(record.id.clone()))?;
        truths.push(truth);

        let context = if needs_dynamic {
            Some(dynamic_context(&cb, record, cfg.k, cfg.n, cfg.clip_adapted)?)
        } else {
            None
        };
        for (strategy, predictions) in resolved.iter().zip(per_strategy.iter_mut()) {
            let prediction = match strategy {
                ResolvedStrategy::Static(tau) => predict_static(record, tau)?,
                ResolvedStrategy::AvgCount => {
                    let (nb, adapted) = context.as_ref().expect("dynamic context");
                    avgcount_select(&record.id, adapted, nb)?
                }
                ResolvedStrategy::RankCal => {
                    let (nb, adapted) = context.as_ref().expect("dynamic context");
                    rankcal_select(&record.id, adapted, nb, cfg.fallback_tau)?
                }
            };
            predictions.push(prediction);
        }
    }

    let mut outcomes = Vec::with_capacity(cfg.strategies.len());
    for (spec, predictions) in cfg.strategies.iter().zip(per_strategy) {
        let predicted: Vec<Vec<u8>> = predictions.iter().map(|p| p.labels.clone()).collect();
        let metrics = rapt_core::compute_metrics(&predicted, &truths)?;
        outcomes.push(StrategyOutcome { strategy: spec.to_string(), metrics, predictions });
    }

    // Strictly-greater comparison keeps the earlier-listed strategy on ties.
    let mut best = &outcomes[0];
    for outcome in &outcomes[1..] {
        if outcome.metrics.macro_f1 > best.metrics.macro_f1 {
            best = outcome;
        }
    }
    let winner = best.strategy.clone();

    let run = RunReport {
        config: cfg.clone(),
        outcomes,
        winner,
        duration_ms: started.elapsed().as_millis() as u64,
    };
    write_run_artifacts(&run)?;
    Ok(run)
}

fn write_run_artifacts(run: &RunReport) -> Result<(), Error> {
    let dir = &run.config.output_dir;
    let predictions_dir = dir.join("predictions");
    let metrics_dir = dir.join("metrics");
    fs::create_dir_all(&predictions_dir).map_err(Error::io(&predictions_dir))?;
    fs::create_dir_all(&metrics_dir).map_err(Error::io(&metrics_dir))?;

    let config_path = dir.join("config.json");
    let config_json =
        serde_json::to_string_pretty(&run.config).expect("config serialization");
    fs::write(&config_path, config_json + "\n").map_err(Error::io(&config_path))?;

    let mut summary = format!("strategy,{}\n", report::METRICS_CSV_HEADER);
    for (spec, outcome) in run.config.strategies.iter().zip(&run.outcomes) {
        let slug = spec.slug();
        let preds_path = predictions_dir.join(format!("{slug}.jsonl"));
        write_predictions(&preds_path, &outcome.predictions)?;

        let metrics_path = metrics_dir.join(format!("{slug}.json"));
        fs::write(&metrics_path, report::metrics_json(&outcome.metrics) + "\n")
            .map_err(Error::io(&metrics_path))?;

        summary.push_str(&format!(
            "{},{}\n",
            outcome.strategy,
            report::metrics_csv_row(&outcome.metrics)
        ));
    }
    let summary_path = dir.join("summary.csv");
    fs::write(&summary_path, summary).map_err(Error::io(&summary_path))?;

    let report_path = dir.join("report.json");
    let report_json = serde_json::to_string_pretty(run).expect("report serialization");
    fs::write(&report_path, report_json + "\n").map_err(Error::io(&report_path))?;
    Ok(())
}

/// Writes predictions as line-delimited JSON.
pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), Error> {
    let mut out = String::new();
    for prediction in predictions {
        out.push_str(&serde_json::to_string(prediction).expect("prediction serialization"));
        out.push('\n');
    }
    fs::write(path, out).map_err(Error::io(path))
}

/// Reads predictions written by [`write_predictions`].
pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, Error> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut predictions = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        predictions.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: index + 1,
            message: e.to_string(),
        })?);
    }
    Ok(predictions)
}

/// Pairs predictions with truth records by id, in prediction order.
pub fn align_predictions_to_truth(
    predictions: &[Prediction],
    truth_records: &[Record],
) -> Result<(Vec<Vec<u8>>, Vec<Vec<u8>>), Error> {
    let mut truth_by_id = std::collections::BTreeMap::new();
    for record in truth_records {
        let labels =
            record.labels.as_ref().ok_or_else(|| Error::MissingLabels(record.id.clone()))?;
        truth_by_id.insert(record.id.as_str(), labels);
    }
    let mut predicted = Vec::with_capacity(predictions.len());
    let mut truths = Vec::with_capacity(predictions.len());
    for prediction in predictions {
        let labels = truth_by_id
            .get(prediction.id.as_str())
            .ok_or_else(|| Error::MissingTruth(prediction.id.clone()))?;
        predicted.push(prediction.labels.clone());
        truths.push((*labels).clone());
    }
    Ok((predicted, truths))
}

/// Loads a `report.json` produced by [`run_experiment`].
pub fn load_report(path: &Path) -> Result<RunReport, Error> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}

/// One report's best-static versus best-dynamic comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub best_static: String,
    pub static_macro_f1: f64,
    pub static_micro_f1: f64,
    pub best_dynamic: String,
    pub dynamic_macro_f1: f64,
    pub dynamic_micro_f1: f64,
    /// Strict improvement in macro-F1; equality counts as a non-win.
    pub dynamic_win: bool,
}

/// Aggregate of [`summarize_winrate`].
#[derive(Debug, Clone, Serialize)]
pub struct WinRateSummary {
    pub rows: Vec<ComparisonRow>,
    pub n_reports: usize,
    pub dynamic_wins: usize,
    pub win_rate: f64,
    pub mean_macro_f1_delta: f64,
    pub mean_micro_f1_delta: f64,
}

/// Compares, per report, the best static strategy against the best dynamic
/// strategy by macro-F1 (the micro delta is taken between those same two
/// winners) and aggregates win counts and mean deltas.
pub fn summarize_winrate(reports: &[RunReport]) -> Result<WinRateSummary, Error> {
    if reports.is_empty() {
        return Err(Error::NoComparablePair);
    }
    let mut rows = Vec::with_capacity(reports.len());
    for report in reports {
        let mut best_static: Option<&StrategyOutcome> = None;
        let mut best_dynamic: Option<&StrategyOutcome> = None;
        for outcome in &report.outcomes {
            let spec: StrategySpec = outcome.strategy.parse()?;
            let slot = if spec.is_dynamic() { &mut best_dynamic } else { &mut best_static };
            // Strictly-greater keeps the earlier-listed strategy on ties.
            if slot.as_ref().is_none_or(|b| outcome.metrics.macro_f1 > b.metrics.macro_f1) {
                *slot = Some(outcome);
            }
        }
        let (static_side, dynamic_side) = match (best_static, best_dynamic) {
            (Some(s), Some(d)) => (s, d),
            _ => return Err(Error::NoComparablePair),
        };
        rows.push(ComparisonRow {
            label: report.config.output_dir.display().to_string(),
            best_static: static_side.strategy.clone(),
            static_macro_f1: static_side.metrics.macro_f1,
            static_micro_f1: static_side.metrics.micro_f1,
            best_dynamic: dynamic_side.strategy.clone(),
            dynamic_macro_f1: dynamic_side.metrics.macro_f1,
            dynamic_micro_f1: dynamic_side.metrics.micro_f1,
            dynamic_win: dynamic_side.metrics.macro_f1 > static_side.metrics.macro_f1,
        });
    }
    let n_reports = rows.len();
    let dynamic_wins = rows.iter().filter(|r| r.dynamic_win).count();
    let mean_macro_f1_delta = rows
        .iter()
        .map(|r| r.dynamic_macro_f1 - r.static_macro_f1)
        .sum::<f64>()
        / n_reports as f64;
    let mean_micro_f1_delta = rows
        .iter()
        .map(|r| r.dynamic_micro_f1 - r.static_micro_f1)
        .sum::<f64>()
        / n_reports as f64;
    Ok(WinRateSummary {
        rows,
        n_reports,
        dynamic_wins,
        win_rate: dynamic_wins as f64 / n_reports as f64,
        mean_macro_f1_delta,
        mean_micro_f1_delta,
    })
}
