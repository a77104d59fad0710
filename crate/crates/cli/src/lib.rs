//! Subcommand implementations behind the `qinc` binary.
//!
//! Each `cmd_*` function is callable in-process so tests can drive them
//! without spawning the binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qinc::data::{self, SplitName, ZoneTopology};
use qinc::eval::{self, ComparisonTable, RunAggregate};
use qinc::gen::{self, IncidentEvent, ScenarioConfig, ScheduleSource};
use qinc::model::HybridModelConfig;
use qinc::nn::TrainConfig;
use qinc::pipeline;
use qinc::verify::{self, SuiteReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qinc::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    /// 1 for verification or data validation failures, 2 for usage and
    /// configuration problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                qinc::Error::Io { .. } => 3,
                qinc::Error::Argument(_) | qinc::Error::Config(_) | qinc::Error::QubitIndex { .. } => 2,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Everything `experiment` needs. Loaded from `--config`, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub splits: Vec<SplitName>,
    pub models: Vec<String>,
    pub train: TrainConfig,
    pub n_runs: usize,
    pub base_seed: u64,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            splits: SplitName::ALL.to_vec(),
            models: vec!["classical".into(), "hybrid-4q".into()],
            train: TrainConfig::default(),
            n_runs: 30,
            base_seed: 0,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn model_configs(&self) -> CliResult<Vec<HybridModelConfig>> {
        self.models
            .iter()
            .map(|m| HybridModelConfig::from_label(m).map_err(CliError::from))
            .collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.model_configs()?;
        if self.splits.is_empty() || self.models.is_empty() {
            return Err(CliError::Usage("at least one split and one model are required".into()));
        }
        if self.n_runs == 0 || self.jobs == 0 {
            return Err(CliError::Usage("runs and jobs must be at least 1".into()));
        }
        Ok(())
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(qinc::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

pub fn read_schedule(path: &Path) -> CliResult<Vec<IncidentEvent>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(qinc::Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    })
}

fn to_json_pretty<T: Serialize>(value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(qinc::Error::from)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub records: usize,
    pub rows: usize,
    pub prevalence: f64,
    pub incidents: usize,
}

/// Writes `bsm.csv`, `schedule.json` and `topology.json` into `out`.
pub fn cmd_gen(config: &ScenarioConfig, out: &Path) -> CliResult<GenSummary> {
    config.validate()?;
    let (records, schedule) = gen::generate(config)?;
    let topology = config.topology()?;
    let rows = pipeline::labeled_rows(&records, &schedule, &topology, 1, Some(config.duration_s))?;

    create_dir(out)?;
    data::write_bsm_csv(&records, &out.join("bsm.csv"))?;
    write_file(&out.join("schedule.json"), &to_json_pretty(&schedule)?)?;
    write_file(&out.join("topology.json"), &to_json_pretty(&topology)?)?;

    Ok(GenSummary {
        records: records.len(),
        rows: rows.len(),
        prevalence: data::prevalence(&rows),
        incidents: schedule.len(),
    })
}

#[derive(Debug, Clone)]
pub struct FeaturesArgs {
    pub bsm: PathBuf,
    pub schedule: Option<PathBuf>,
    pub topology: Option<PathBuf>,
    pub n_zones: usize,
    pub n_directions: usize,
    pub bucket_seconds: u64,
    pub horizon_s: Option<u64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturesSummary {
    pub rows: usize,
    pub prevalence: f64,
    /// False when no schedule was given and every label is 0.
    pub labeled: bool,
}

/// BSM CSV → labeled feature CSV.
pub fn cmd_features(args: &FeaturesArgs) -> CliResult<FeaturesSummary> {
    if args.bucket_seconds == 0 {
        return Err(CliError::Usage("bucket must be at least 1 second".into()));
    }
    let topology = match &args.topology {
        Some(p) => ZoneTopology::read_json(p)?,
        None => ZoneTopology::corridor(args.n_zones, args.n_directions)?,
    };
    let schedule = match &args.schedule {
        Some(p) => read_schedule(p)?,
        None => Vec::new(),
    };
    let records = data::read_bsm_csv(&args.bsm)?;
    let rows = pipeline::labeled_rows(&records, &schedule, &topology, args.bucket_seconds, args.horizon_s)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    data::write_feature_csv(&rows, &args.out)?;
    Ok(FeaturesSummary {
        rows: rows.len(),
        prevalence: data::prevalence(&rows),
        labeled: args.schedule.is_some(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub split: SplitName,
    pub n_runs: usize,
    pub base_seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_positives: usize,
    pub models: Vec<RunAggregate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Set when a later split or model failed; earlier results are kept.
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub splits: Vec<SplitReport>,
}

impl ExperimentReport {
    pub fn tables(&self) -> CliResult<Vec<ComparisonTable>> {
        self.splits
            .iter()
            .filter(|s| !s.models.is_empty())
            .map(|s| eval::compare(&s.models).map_err(CliError::from))
            .collect()
    }

    pub fn render_tables(&self) -> CliResult<String> {
        let mut out = String::new();
        for (i, table) in self.tables()?.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = write!(out, "{}", table.render_text());
        }
        Ok(out)
    }
}

fn run_splits(config: &ExperimentConfig, report: &mut ExperimentReport) -> CliResult<()> {
    let models = config.model_configs()?;
    for &name in &config.splits {
        let split = pipeline::prepare_split(&config.scenario, name)?;
        report.splits.push(SplitReport {
            split: name,
            n_runs: config.n_runs,
            base_seed: config.base_seed,
            train_rows: split.train_rows.len(),
            test_rows: split.test_rows.len(),
            test_positives: split.test_rows.iter().filter(|r| r.label == 1).count(),
            models: Vec::new(),
        });
        for model in &models {
            let aggregate = eval::run_experiment(
                model,
                &split,
                &config.train,
                config.n_runs,
                config.base_seed,
                config.jobs,
            )?;
            report.splits.last_mut().expect("pushed above").models.push(aggregate);
        }
    }
    Ok(())
}

/// Runs every (split, model) pair and writes `report.json` and `tables.txt`
/// into `out`. On failure the report is still written with `partial: true`.
pub fn cmd_experiment(config: &ExperimentConfig, out: &Path) -> CliResult<ExperimentReport> {
    config.validate()?;
    create_dir(out)?;
    let mut report = ExperimentReport {
        config: config.clone(),
        partial: false,
        error: None,
        splits: Vec::new(),
    };
    let outcome = run_splits(config, &mut report);
    if let Err(e) = &outcome {
        report.partial = true;
        report.error = Some(e.to_string());
    }
    write_file(&out.join("report.json"), &to_json_pretty(&report)?)?;
    write_file(&out.join("tables.txt"), &report.render_tables()?)?;
    outcome.map(|()| report)
}

/// One line per suite.
pub fn render_gradcheck(reports: &[SuiteReport]) -> String {
    reports
        .iter()
        .map(|r| {
            format!(
                "{} {}: cases={} max_error={:.3e} tolerance={:.0e} worst={}\n",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.cases,
                r.max_error,
                r.tolerance,
                r.worst_case
            )
        })
        .collect()
}

pub fn cmd_gradcheck(seed: u64, corrupt: bool) -> CliResult<Vec<SuiteReport>> {
    let reports = verify::run_gradcheck(seed, corrupt);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::Verification(format!(
            "{}gradient check failed: {}",
            render_gradcheck(&reports),
            failed.join(", ")
        )))
    }
}

/// Explicit schedule loaded from a file replaces the automatic one.
pub fn with_schedule_file(mut config: ScenarioConfig, path: Option<&Path>) -> CliResult<ScenarioConfig> {
    if let Some(p) = path {
        config.schedule = ScheduleSource::Explicit(read_schedule(p)?);
    }
    Ok(config)
}
