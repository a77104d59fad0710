//! End-to-end: scenario → zone aggregates → labeled rows → normalized splits.

use crate::data::{aggregate, build_features, label, normalize, split, AggregationConfig, BsmRecord, DatasetSplit, FeatureRow, SplitName, ZoneTopology};
use crate::error::Result;
use crate::gen::{generate, IncidentEvent, ScenarioConfig};

/// Scenario length used for the per-minute split: 25 minutes × 56 zones = 1400 rows.
pub const PER_MINUTE_DURATION_S: u64 = 1500;

/// Labeled rows from already-collected records.
pub fn labeled_rows(
    records: &[BsmRecord],
    schedule: &[IncidentEvent],
    topology: &ZoneTopology,
    bucket_seconds: u64,
    horizon_s: Option<u64>,
) -> Result<Vec<FeatureRow>> {
    let mut config = AggregationConfig::new(bucket_seconds, topology.n_zones());
    config.horizon_s = horizon_s;
    let aggregates = aggregate(records, &config)?;
    let mut rows = build_features(&aggregates, topology)?;
    label(&mut rows, schedule, bucket_seconds);
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ScenarioRows {
    pub schedule: Vec<IncidentEvent>,
    pub rows: Vec<FeatureRow>,
}

pub fn scenario_rows(config: &ScenarioConfig, bucket_seconds: u64) -> Result<ScenarioRows> {
    let (records, schedule) = generate(config)?;
    let rows = labeled_rows(&records, &schedule, &config.topology()?, bucket_seconds, Some(config.duration_s))?;
    Ok(ScenarioRows { schedule, rows })
}

/// The scenario a split is drawn from: DS-3 runs the same generator over
/// [`PER_MINUTE_DURATION_S`] and aggregates per minute.
pub fn scenario_for(base: &ScenarioConfig, name: SplitName) -> ScenarioConfig {
    match name {
        SplitName::Ds3 => ScenarioConfig {
            duration_s: PER_MINUTE_DURATION_S,
            ..base.clone()
        },
        _ => base.clone(),
    }
}

/// Normalized split for `name` generated from `base`.
pub fn prepare_split(base: &ScenarioConfig, name: SplitName) -> Result<DatasetSplit> {
    let scenario = scenario_for(base, name);
    let rows = scenario_rows(&scenario, name.bucket_seconds())?.rows;
    normalize(split(&rows, name)?)
}
