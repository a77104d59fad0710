//! Confusion counts, accuracy/precision/recall/F2 and the repeated-run harness.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, SplitName};
use crate::error::{Error, Result};
use crate::model::{build_model, train, HybridModelConfig, ModelKind};
use crate::nn::TrainConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Counts that may be fractional, as when averaged over runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanCounts {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: f64,
}

impl MeanCounts {
    /// Counts for a test set of `total` rows given TP/FP/FN; TN is the remainder.
    pub fn from_table(tp: f64, fp: f64, fn_: f64, total: f64) -> Self {
        Self {
            tp,
            fp,
            fn_,
            tn: total - tp - fp - fn_,
        }
    }
}

impl From<ConfusionCounts> for MeanCounts {
    fn from(c: ConfusionCounts) -> Self {
        Self {
            tp: c.tp as f64,
            fp: c.fp as f64,
            fn_: c.fn_ as f64,
            tn: c.tn as f64,
        }
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::argument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Metric values; `None` marks an undefined ratio (printed as NaN).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: MeanCounts,
    #[serde(flatten)]
    pub metrics: Metrics,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// F_β with β = 2: 5PR / (4P + R).
pub fn f2_score(precision: f64, recall: f64) -> Option<f64> {
    ratio(5.0 * precision * recall, 4.0 * precision + recall)
}

pub fn metrics(counts: impl Into<MeanCounts>) -> MetricsReport {
    let c = counts.into();
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f2 = match (precision, recall) {
        (Some(p), Some(r)) => f2_score(p, r),
        _ => None,
    };
    MetricsReport {
        counts: c,
        metrics: Metrics {
            accuracy: ratio(c.tp + c.tn, c.tp + c.fp + c.fn_ + c.tn),
            precision,
            recall,
            f2,
        },
    }
}

/// How many runs contributed to each averaged metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinedRuns {
    pub accuracy: usize,
    pub precision: usize,
    pub recall: usize,
    pub f2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Accuracy on the training rows after the last epoch.
    pub train_accuracy: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    pub split: SplitName,
    pub n_runs: usize,
    pub base_seed: u64,
    pub mean_counts: MeanCounts,
    /// Per-run metrics averaged over the runs where each is defined.
    pub mean_metrics: Metrics,
    pub defined_runs: DefinedRuns,
    /// Metrics recomputed from the mean counts.
    pub metrics_of_mean_counts: Metrics,
    pub per_run: Vec<RunRecord>,
}

impl RunAggregate {
    pub fn mean_train_accuracy(&self) -> f64 {
        self.per_run.iter().map(|r| r.train_accuracy).sum::<f64>() / self.per_run.len() as f64
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (ratio(sum, n as f64), n)
}

/// Averages per-run reports in run order.
pub fn aggregate_runs(
    config: &HybridModelConfig,
    split: SplitName,
    base_seed: u64,
    per_run: Vec<RunRecord>,
) -> Result<RunAggregate> {
    if per_run.is_empty() {
        return Err(Error::argument("at least one run is required"));
    }
    let n = per_run.len() as f64;
    let mut mean_counts = MeanCounts::default();
    for r in &per_run {
        mean_counts.tp += r.counts.tp as f64;
        mean_counts.fp += r.counts.fp as f64;
        mean_counts.fn_ += r.counts.fn_ as f64;
        mean_counts.tn += r.counts.tn as f64;
    }
    mean_counts.tp /= n;
    mean_counts.fp /= n;
    mean_counts.fn_ /= n;
    mean_counts.tn /= n;

    let (accuracy, acc_n) = mean_defined(per_run.iter().map(|r| r.metrics.accuracy));
    let (precision, prec_n) = mean_defined(per_run.iter().map(|r| r.metrics.precision));
    let (recall, rec_n) = mean_defined(per_run.iter().map(|r| r.metrics.recall));
    let (f2, f2_n) = mean_defined(per_run.iter().map(|r| r.metrics.f2));

    Ok(RunAggregate {
        kind: config.label(),
        qubits: (config.kind == ModelKind::Hybrid).then_some(config.n_qubits),
        split,
        n_runs: per_run.len(),
        base_seed,
        mean_counts,
        mean_metrics: Metrics {
            accuracy,
            precision,
            recall,
            f2,
        },
        defined_runs: DefinedRuns {
            accuracy: acc_n,
            precision: prec_n,
            recall: rec_n,
            f2: f2_n,
        },
        metrics_of_mean_counts: metrics(mean_counts).metrics,
        per_run,
    })
}

/// One full train/evaluate cycle with model and shuffle seed `seed`.
pub fn run_once(
    model_config: &HybridModelConfig,
    split: &DatasetSplit,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<RunRecord> {
    let model = build_model(model_config, seed)?;
    let cfg = TrainConfig {
        seed,
        ..train_config.clone()
    };
    let trained = train(model, &split.train_rows, &cfg)?;
    let predict_all = |rows: &[crate::data::FeatureRow]| -> Result<Vec<u8>> {
        rows.iter().map(|r| trained.predict(&r.features)).collect()
    };
    let labels = |rows: &[crate::data::FeatureRow]| rows.iter().map(|r| r.label).collect::<Vec<_>>();

    let counts = confusion(&predict_all(&split.test_rows)?, &labels(&split.test_rows))?;
    let train_counts = confusion(&predict_all(&split.train_rows)?, &labels(&split.train_rows))?;
    Ok(RunRecord {
        seed,
        counts,
        metrics: metrics(counts).metrics,
        train_accuracy: (train_counts.tp + train_counts.tn) as f64 / train_counts.total() as f64,
        final_loss: trained.history.last().map_or(f64::NAN, |e| e.mean_loss),
    })
}

/// `n_runs` independent runs seeded `base_seed + i`, optionally on `jobs`
/// worker threads. Results are reduced in run order, so the aggregate does not
/// depend on `jobs`.
pub fn run_experiment(
    model_config: &HybridModelConfig,
    split: &DatasetSplit,
    train_config: &TrainConfig,
    n_runs: usize,
    base_seed: u64,
    jobs: usize,
) -> Result<RunAggregate> {
    if n_runs == 0 {
        return Err(Error::argument("n_runs must be at least 1"));
    }
    if split.normalization.is_none() {
        return Err(Error::argument(format!("split {} is not normalized", split.name)));
    }
    let seeds: Vec<u64> = (0..n_runs as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let runs: Vec<RunRecord> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config(e.to_string()))?;
        pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| run_once(model_config, split, train_config, s))
                .collect::<Result<_>>()
        })?
    } else {
        seeds
            .iter()
            .map(|&s| run_once(model_config, split, train_config, s))
            .collect::<Result<_>>()?
    };
    aggregate_runs(model_config, split.name, base_seed, runs)
}

pub const TABLE_COLUMNS: [&str; 8] = [
    "Incident Detection Model",
    "TP",
    "FP",
    "FN",
    "Accuracy",
    "Precision",
    "Recall",
    "F2-score",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub split: SplitName,
    pub rows: Vec<ComparisonRow>,
}

pub fn display_name(aggregate: &RunAggregate) -> String {
    match aggregate.qubits {
        Some(q) => format!("Hybrid ({q} qubits)"),
        None => "NN".to_string(),
    }
}

/// Rows in the given order; all aggregates must come from the same split.
pub fn compare(aggregates: &[RunAggregate]) -> Result<ComparisonTable> {
    let first = aggregates
        .first()
        .ok_or_else(|| Error::argument("nothing to compare"))?;
    if let Some(other) = aggregates.iter().find(|a| a.split != first.split) {
        return Err(Error::argument(format!(
            "cannot compare results from {} and {}",
            first.split, other.split
        )));
    }
    Ok(ComparisonTable {
        split: first.split,
        rows: aggregates
            .iter()
            .map(|a| ComparisonRow {
                model: display_name(a),
                tp: a.mean_counts.tp,
                fp: a.mean_counts.fp,
                fn_: a.mean_counts.fn_,
                metrics: a.mean_metrics,
            })
            .collect(),
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |v| format!("{v:.3}"))
}

fn fmt_count(v: f64) -> String {
    let rounded = format!("{v:.3}");
    rounded.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl ComparisonTable {
    pub fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.model.clone(),
                    fmt_count(r.tp),
                    fmt_count(r.fp),
                    fmt_count(r.fn_),
                    fmt_metric(r.metrics.accuracy),
                    fmt_metric(r.metrics.precision),
                    fmt_metric(r.metrics.recall),
                    fmt_metric(r.metrics.f2),
                ]
            })
            .collect()
    }

    /// Column-aligned text with a title line.
    pub fn render_text(&self) -> String {
        let cells = self.cells();
        let mut widths: Vec<usize> = TABLE_COLUMNS.iter().map(|c| c.len()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = format!("Comparison of Model Performance for {}\n", self.split);
        let line = |out: &mut String, row: &[&str]| {
            let parts: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &TABLE_COLUMNS);
        for row in &cells {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }
}
