//! Zone aggregation, six-feature rows, labeling, normalization, splits and CSV I/O.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gen::IncidentEvent;

pub const N_FEATURES: usize = 6;

pub const BSM_HEADER: [&str; 4] = ["time_s", "vehicle_id", "zone_id", "speed_mps"];
pub const FEATURE_HEADER: [&str; 9] = [
    "bucket_start_s",
    "zone_id",
    "spd_z",
    "cnt_z",
    "spd_up",
    "cnt_up",
    "spd_dn",
    "cnt_dn",
    "label",
];

/// One connected-vehicle observation, already mapped to a zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsmRecord {
    #[serde(rename = "time_s")]
    pub time: u64,
    pub vehicle_id: String,
    pub zone_id: usize,
    #[serde(rename = "speed_mps")]
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneAggregate {
    pub zone_id: usize,
    pub bucket_start: u64,
    pub avg_speed: f64,
    pub count: f64,
}

/// Features in order: zone speed, zone count, upstream speed, upstream count,
/// downstream speed, downstream count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub bucket_start: u64,
    pub zone_id: usize,
    pub features: [f64; N_FEATURES],
    pub label: u8,
}

/// Ordered zone ids per travel direction. Serializes as `[[0, 1, ...], [28, ...]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneTopology {
    pub directions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbors {
    pub upstream: Option<usize>,
    pub downstream: Option<usize>,
}

impl ZoneTopology {
    /// `n_zones` split into `n_directions` contiguous runs of ids, each ordered
    /// in travel direction (the first run takes any remainder).
    pub fn corridor(n_zones: usize, n_directions: usize) -> Result<Self> {
        if n_zones == 0 || n_directions == 0 || n_directions > n_zones {
            return Err(Error::config(format!(
                "cannot lay out {n_zones} zones over {n_directions} directions"
            )));
        }
        let base = n_zones / n_directions;
        let extra = n_zones % n_directions;
        let mut start = 0;
        let directions = (0..n_directions)
            .map(|d| {
                let len = base + usize::from(d < extra);
                let run = (start..start + len).collect();
                start += len;
                run
            })
            .collect();
        Ok(Self { directions })
    }

    pub fn n_zones(&self) -> usize {
        self.directions.iter().map(Vec::len).sum()
    }

    /// Neighbor lookup indexed by zone id. Fails on duplicate ids or ids not
    /// in `0..n_zones`.
    pub fn neighbor_table(&self, n_zones: usize) -> Result<Vec<Neighbors>> {
        let mut table: Vec<Option<Neighbors>> = vec![None; n_zones];
        for run in &self.directions {
            for (pos, &zone) in run.iter().enumerate() {
                let slot = table
                    .get_mut(zone)
                    .ok_or_else(|| Error::data(format!("topology zone {zone} outside 0..{n_zones}")))?;
                if slot.is_some() {
                    return Err(Error::data(format!("zone {zone} appears twice in the topology")));
                }
                *slot = Some(Neighbors {
                    upstream: pos.checked_sub(1).map(|p| run[p]),
                    downstream: run.get(pos + 1).copied(),
                });
            }
        }
        table
            .into_iter()
            .enumerate()
            .map(|(zone, n)| n.ok_or_else(|| Error::data(format!("zone {zone} missing from topology"))))
            .collect()
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationConfig {
    /// 1 (per second) or 60 (per minute).
    pub bucket_seconds: u64,
    pub n_zones: usize,
    /// Seconds covered, `[0, horizon)`. Defaults to one past the last record.
    pub horizon_s: Option<u64>,
    /// Average speed reported for a bucket with no vehicles.
    pub empty_speed_fill: f64,
}

impl AggregationConfig {
    pub fn new(bucket_seconds: u64, n_zones: usize) -> Self {
        Self {
            bucket_seconds,
            n_zones,
            horizon_s: None,
            empty_speed_fill: 0.0,
        }
    }

    pub fn with_horizon(mut self, horizon_s: u64) -> Self {
        self.horizon_s = Some(horizon_s);
        self
    }
}

/// One aggregate per (bucket, zone) over the whole horizon, ordered by
/// `(bucket_start, zone_id)`, including empty buckets.
///
/// Per-second counts are distinct vehicles in that second. A per-minute count is
/// the mean of its per-second counts; its speed is the mean over all member records.
pub fn aggregate(records: &[BsmRecord], config: &AggregationConfig) -> Result<Vec<ZoneAggregate>> {
    let bucket = config.bucket_seconds;
    if bucket != 1 && bucket != 60 {
        return Err(Error::config(format!("bucket must be 1 or 60 seconds, got {bucket}")));
    }
    let horizon = config
        .horizon_s
        .unwrap_or_else(|| records.iter().map(|r| r.time + 1).max().unwrap_or(0));
    let n_zones = config.n_zones;
    let n_seconds = horizon as usize;

    // per (second, zone): speed sum, record count, distinct vehicles
    let mut speed_sum = vec![0.0; n_seconds * n_zones];
    let mut records_in = vec![0u32; n_seconds * n_zones];
    let mut vehicles: Vec<HashSet<&str>> = vec![HashSet::new(); n_seconds * n_zones];
    for r in records {
        if r.zone_id >= n_zones {
            return Err(Error::data(format!("record zone {} outside 0..{n_zones}", r.zone_id)));
        }
        if r.time >= horizon {
            continue;
        }
        let idx = r.time as usize * n_zones + r.zone_id;
        speed_sum[idx] += r.speed;
        records_in[idx] += 1;
        vehicles[idx].insert(r.vehicle_id.as_str());
    }

    let n_buckets = horizon.div_ceil(bucket);
    let mut out = Vec::with_capacity(n_buckets as usize * n_zones);
    for b in 0..n_buckets {
        let start = b * bucket;
        let end = (start + bucket).min(horizon);
        for zone in 0..n_zones {
            let (mut sum, mut n, mut count_sum) = (0.0, 0u64, 0.0);
            for t in start..end {
                let idx = t as usize * n_zones + zone;
                sum += speed_sum[idx];
                n += u64::from(records_in[idx]);
                count_sum += vehicles[idx].len() as f64;
            }
            let count = count_sum / (end - start) as f64;
            let avg_speed = if n == 0 { config.empty_speed_fill } else { sum / n as f64 };
            out.push(ZoneAggregate {
                zone_id: zone,
                bucket_start: start,
                avg_speed,
                count,
            });
        }
    }
    Ok(out)
}

/// Six-feature rows (labels 0), ordered by `(bucket_start, zone_id)`. A zone at
/// the start or end of its direction reuses its own values for the missing neighbor.
pub fn build_features(aggregates: &[ZoneAggregate], topology: &ZoneTopology) -> Result<Vec<FeatureRow>> {
    let n_zones = topology.n_zones();
    let neighbors = topology.neighbor_table(n_zones)?;
    let mut by_bucket: BTreeMap<u64, Vec<Option<&ZoneAggregate>>> = BTreeMap::new();
    for agg in aggregates {
        if agg.zone_id >= n_zones {
            return Err(Error::data(format!("aggregate for unknown zone {}", agg.zone_id)));
        }
        by_bucket.entry(agg.bucket_start).or_insert_with(|| vec![None; n_zones])[agg.zone_id] = Some(agg);
    }

    let mut rows = Vec::with_capacity(aggregates.len());
    for (&bucket_start, zones) in &by_bucket {
        let get = |zone: usize| {
            zones[zone].ok_or_else(|| {
                Error::data(format!("no aggregate for zone {zone} at bucket {bucket_start}"))
            })
        };
        for (zone, agg) in zones.iter().enumerate() {
            let Some(own) = agg else { continue };
            let up = neighbors[zone].upstream.map(get).transpose()?.unwrap_or(own);
            let down = neighbors[zone].downstream.map(get).transpose()?.unwrap_or(own);
            rows.push(FeatureRow {
                bucket_start,
                zone_id: zone,
                features: [
                    own.avg_speed,
                    own.count,
                    up.avg_speed,
                    up.count,
                    down.avg_speed,
                    down.count,
                ],
                label: 0,
            });
        }
    }
    Ok(rows)
}

/// Sets each row's label to 1 iff an incident in its zone overlaps
/// `[bucket_start, bucket_start + bucket_seconds)`.
pub fn label(rows: &mut [FeatureRow], schedule: &[IncidentEvent], bucket_seconds: u64) {
    for row in rows.iter_mut() {
        let (lo, hi) = (row.bucket_start, row.bucket_start + bucket_seconds);
        row.label = u8::from(schedule.iter().any(|e| {
            e.zone == row.zone_id && e.start_s < hi && lo < e.start_s + e.duration_s
        }));
    }
}

pub fn prevalence(rows: &[FeatureRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.label == 1).count() as f64 / rows.len() as f64
}

/// Per-feature min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl Normalization {
    pub fn fit(rows: &[FeatureRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::argument("cannot fit normalization on an empty set"));
        }
        let mut min = [f64::INFINITY; N_FEATURES];
        let mut max = [f64::NEG_INFINITY; N_FEATURES];
        for row in rows {
            for k in 0..N_FEATURES {
                min[k] = min[k].min(row.features[k]);
                max[k] = max[k].max(row.features[k]);
            }
        }
        Ok(Self { min, max })
    }

    /// (x − min)/(max − min), unclamped; a constant training feature maps to 0.
    pub fn apply(&self, features: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|k| {
            let range = self.max[k] - self.min[k];
            if range > 0.0 {
                (features[k] - self.min[k]) / range
            } else {
                0.0
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SplitName {
    #[serde(rename = "DS-1")]
    Ds1,
    #[serde(rename = "DS-2")]
    Ds2,
    #[serde(rename = "DS-3")]
    Ds3,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Ds1, SplitName::Ds2, SplitName::Ds3];

    /// (train rows, reference total rows).
    pub fn sizes(self) -> (usize, usize) {
        match self {
            SplitName::Ds1 => (40_000, 70_000),
            SplitName::Ds2 => (15_000, 70_000),
            SplitName::Ds3 => (150, 1_400),
        }
    }

    pub fn bucket_seconds(self) -> u64 {
        match self {
            SplitName::Ds1 | SplitName::Ds2 => 1,
            SplitName::Ds3 => 60,
        }
    }

    /// Training rows for a source of `total` rows, scaled proportionally.
    pub fn train_size(self, total: usize) -> usize {
        let (train, reference) = self.sizes();
        if total == reference {
            train
        } else {
            ((train as u128 * total as u128 + reference as u128 / 2) / reference as u128) as usize
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Ds1 => "DS-1",
            SplitName::Ds2 => "DS-2",
            SplitName::Ds3 => "DS-3",
        })
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DS-1" | "DS1" => Ok(SplitName::Ds1),
            "DS-2" | "DS2" => Ok(SplitName::Ds2),
            "DS-3" | "DS3" => Ok(SplitName::Ds3),
            _ => Err(Error::config(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub train_rows: Vec<FeatureRow>,
    pub test_rows: Vec<FeatureRow>,
    /// Set by [`normalize`]; fitted on `train_rows` only.
    pub normalization: Option<Normalization>,
}

/// Chronological prefix split: the first `train_size` rows train, the rest test.
pub fn split(rows: &[FeatureRow], name: SplitName) -> Result<DatasetSplit> {
    let train = name.train_size(rows.len());
    if train == 0 || train >= rows.len() {
        return Err(Error::data(format!(
            "{name} needs more than {train} rows, source has {}",
            rows.len()
        )));
    }
    Ok(DatasetSplit {
        name,
        train_rows: rows[..train].to_vec(),
        test_rows: rows[train..].to_vec(),
        normalization: None,
    })
}

/// Fits min-max scaling on the training rows and applies it to both sides.
/// The fitted parameters are composed with any earlier normalization so the
/// split always maps raw features to model inputs.
pub fn normalize(mut split: DatasetSplit) -> Result<DatasetSplit> {
    let fitted = Normalization::fit(&split.train_rows)?;
    for row in split.train_rows.iter_mut().chain(split.test_rows.iter_mut()) {
        row.features = fitted.apply(&row.features);
    }
    split.normalization = Some(match split.normalization {
        None => fitted,
        Some(prev) => compose(&prev, &fitted),
    });
    Ok(split)
}

fn compose(first: &Normalization, second: &Normalization) -> Normalization {
    // x -> (x - a)/r1 -> ((x - a)/r1 - b)/r2 == (x - (a + b r1)) / (r1 r2)
    let mut out = first.clone();
    for k in 0..N_FEATURES {
        let r1 = first.max[k] - first.min[k];
        let r2 = second.max[k] - second.min[k];
        if r1 > 0.0 && r2 > 0.0 {
            out.min[k] = first.min[k] + second.min[k] * r1;
            out.max[k] = out.min[k] + r1 * r2;
        } else {
            out.max[k] = out.min[k];
        }
    }
    out
}

fn check_header(path: &Path, reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header `{}`, want `{}`", header.iter().collect::<Vec<_>>().join(","), expected.join(",")),
        });
    }
    Ok(())
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file)))
}

/// Deserializes every data row, handing each value and its 1-based line
/// number to `check`.
fn read_rows<T, U>(
    path: &Path,
    expected: &[&str],
    mut check: impl FnMut(T, u64) -> std::result::Result<U, String>,
) -> Result<Vec<U>>
where
    T: for<'de> Deserialize<'de>,
{
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, expected)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut out = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let value: T = record.deserialize(Some(&headers)).map_err(|e| parse_err(e.to_string()))?;
        out.push(check(value, line).map_err(parse_err)?);
    }
    Ok(out)
}

pub fn read_bsm_csv(path: &Path) -> Result<Vec<BsmRecord>> {
    read_rows(path, &BSM_HEADER, |record: BsmRecord, _| {
        if record.speed.is_finite() && record.speed >= 0.0 {
            Ok(record)
        } else {
            Err(format!("speed must be finite and non-negative, got {}", record.speed))
        }
    })
}

pub fn write_bsm_csv(records: &[BsmRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(BSM_HEADER).map_err(err)?;
    for r in records {
        w.write_record([
            r.time.to_string(),
            r.vehicle_id.clone(),
            r.zone_id.to_string(),
            r.speed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct FeatureCsvRow {
    bucket_start_s: u64,
    zone_id: usize,
    spd_z: f64,
    cnt_z: f64,
    spd_up: f64,
    cnt_up: f64,
    spd_dn: f64,
    cnt_dn: f64,
    label: u8,
}

pub fn write_feature_csv(rows: &[FeatureRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", FEATURE_HEADER.join(",")).map_err(io)?;
    for r in rows {
        let [a, b, c, d, e, f] = r.features;
        writeln!(w, "{},{},{a},{b},{c},{d},{e},{f},{}", r.bucket_start, r.zone_id, r.label).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    read_rows(path, &FEATURE_HEADER, |r: FeatureCsvRow, _| {
        if r.label > 1 {
            return Err(format!("label must be 0 or 1, got {}", r.label));
        }
        Ok(FeatureRow {
            bucket_start: r.bucket_start_s,
            zone_id: r.zone_id,
            features: [r.spd_z, r.cnt_z, r.spd_up, r.cnt_up, r.spd_dn, r.cnt_dn],
            label: r.label,
        })
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn rec(time: u64, vehicle: &str, zone: usize, speed: f64) -> BsmRecord {
        BsmRecord {
            time,
            vehicle_id: vehicle.to_string(),
            zone_id: zone,
            speed,
        }
    }

    fn row(bucket: u64, zone: usize, features: [f64; 6]) -> FeatureRow {
        FeatureRow {
            bucket_start: bucket,
            zone_id: zone,
            features,
            label: 0,
        }
    }

    #[test]
    fn per_second_mean_and_count() {
        let records = [rec(12, "a", 5, 20.0), rec(12, "b", 5, 30.0)];
        let aggs = aggregate(&records, &AggregationConfig::new(1, 8).with_horizon(20)).unwrap();
        assert_eq!(aggs.len(), 8 * 20);
        let hit = aggs.iter().find(|a| a.zone_id == 5 && a.bucket_start == 12).unwrap();
        assert_eq!((hit.avg_speed, hit.count), (25.0, 2.0));
        let empty = aggs.iter().find(|a| a.zone_id == 4 && a.bucket_start == 12).unwrap();
        assert_eq!((empty.avg_speed, empty.count), (0.0, 0.0));
    }

    #[test]
    fn empty_fill_is_configurable() {
        let mut cfg = AggregationConfig::new(1, 2).with_horizon(1);
        cfg.empty_speed_fill = 31.0;
        let aggs = aggregate(&[], &cfg).unwrap();
        assert!(aggs.iter().all(|a| a.avg_speed == 31.0 && a.count == 0.0));
    }

    #[test]
    fn per_minute_constant_series() {
        let records: Vec<_> = (0..60).map(|t| rec(t, &format!("v{t}"), 0, 10.0)).collect();
        let aggs = aggregate(&records, &AggregationConfig::new(60, 1)).unwrap();
        assert_eq!(aggs.len(), 1);
        assert_eq!((aggs[0].avg_speed, aggs[0].count), (10.0, 1.0));
    }

    #[test]
    fn per_minute_partial_last_bucket() {
        let aggs = aggregate(&[], &AggregationConfig::new(60, 56).with_horizon(1250)).unwrap();
        assert_eq!(aggs.len(), 56 * 21);
        let aggs = aggregate(&[], &AggregationConfig::new(60, 56).with_horizon(1500)).unwrap();
        assert_eq!(aggs.len(), 1400);
    }

    #[test]
    fn aggregate_counts_distinct_vehicles() {
        let records = [rec(0, "a", 0, 10.0), rec(0, "a", 0, 12.0)];
        let aggs = aggregate(&records, &AggregationConfig::new(1, 1)).unwrap();
        assert_eq!(aggs[0].count, 1.0);
        assert_eq!(aggs[0].avg_speed, 11.0);
    }

    #[test]
    fn aggregate_rejects_bad_bucket_and_zone() {
        assert!(matches!(aggregate(&[], &AggregationConfig::new(5, 1)), Err(Error::Config(_))));
        assert!(matches!(
            aggregate(&[rec(0, "a", 3, 1.0)], &AggregationConfig::new(1, 2)),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn corridor_layout() {
        let t = ZoneTopology::corridor(56, 2).unwrap();
        assert_eq!(t.directions[0], (0..28).collect::<Vec<_>>());
        assert_eq!(t.directions[1], (28..56).collect::<Vec<_>>());
        let n = t.neighbor_table(56).unwrap();
        assert_eq!(n[0], Neighbors { upstream: None, downstream: Some(1) });
        assert_eq!(n[27], Neighbors { upstream: Some(26), downstream: None });
        assert_eq!(n[28].upstream, None);
        assert_eq!(serde_json::to_string(&ZoneTopology::corridor(4, 2).unwrap()).unwrap(), "[[0,1],[2,3]]");
    }

    #[test]
    fn topology_rejects_duplicates() {
        let t = ZoneTopology { directions: vec![vec![0, 1], vec![1, 2]] };
        assert!(t.neighbor_table(3).is_err());
    }

    #[test]
    fn feature_selection_and_boundaries() {
        let topo = ZoneTopology { directions: vec![vec![0, 1, 2]] };
        let aggs: Vec<_> = (0..3)
            .map(|z| ZoneAggregate {
                zone_id: z,
                bucket_start: 0,
                avg_speed: 10.0 * (z + 1) as f64,
                count: (z + 1) as f64,
            })
            .collect();
        let rows = build_features(&aggs, &topo).unwrap();
        assert_eq!(rows[1].features, [20.0, 2.0, 10.0, 1.0, 30.0, 3.0]);
        assert_eq!(rows[0].features, [10.0, 1.0, 10.0, 1.0, 20.0, 2.0]);
        assert_eq!(rows[2].features, [30.0, 3.0, 20.0, 2.0, 30.0, 3.0]);
    }

    #[test]
    fn features_reject_unknown_zone() {
        let topo = ZoneTopology { directions: vec![vec![0, 1]] };
        let agg = ZoneAggregate { zone_id: 4, bucket_start: 0, avg_speed: 1.0, count: 1.0 };
        assert!(matches!(build_features(&[agg], &topo), Err(Error::Data(_))));
    }

    #[test]
    fn full_scale_row_count() {
        let aggs = aggregate(&[], &AggregationConfig::new(1, 56).with_horizon(1250)).unwrap();
        let rows = build_features(&aggs, &ZoneTopology::corridor(56, 2).unwrap()).unwrap();
        assert_eq!(rows.len(), 70_000);
        assert!(rows.windows(2).all(|w| (w[0].bucket_start, w[0].zone_id) < (w[1].bucket_start, w[1].zone_id)));
    }

    #[test]
    fn labeling_per_second_and_minute() {
        let event = IncidentEvent { zone: 3, start_s: 100, duration_s: 60 };
        let mut secs: Vec<_> = (90..170).map(|t| row(t, 3, [0.0; 6])).collect();
        secs.push(row(120, 2, [0.0; 6]));
        label(&mut secs, &[], 1);
        assert!(secs.iter().all(|r| r.label == 0));
        label(&mut secs, &[event], 1);
        for r in &secs {
            let expect = r.zone_id == 3 && (100..160).contains(&r.bucket_start);
            assert_eq!(r.label == 1, expect, "t={}", r.bucket_start);
        }
        let mut mins: Vec<_> = (0..4).map(|m| row(m * 60, 3, [0.0; 6])).collect();
        label(&mut mins, &[event], 60);
        assert_eq!(mins.iter().map(|r| r.label).collect::<Vec<_>>(), [0, 1, 1, 0]);
    }

    #[test]
    fn normalization_cases() {
        let train: Vec<_> = [10.0, 20.0, 30.0].iter().map(|&v| row(0, 0, [v, 5.0, 0.0, 0.0, 0.0, 0.0])).collect();
        let test = vec![row(1, 0, [40.0, 7.0, 0.0, 0.0, 0.0, 0.0])];
        let s = normalize(DatasetSplit { name: SplitName::Ds1, train_rows: train, test_rows: test, normalization: None }).unwrap();
        let col: Vec<f64> = s.train_rows.iter().map(|r| r.features[0]).collect();
        assert_eq!(col, [0.0, 0.5, 1.0]);
        assert!(s.train_rows.iter().all(|r| r.features[1] == 0.0));
        assert_eq!(s.test_rows[0].features[0], 1.5);
        assert_eq!(s.test_rows[0].features[1], 0.0);
    }

    #[test]
    fn renormalizing_is_identity_on_train() {
        let train: Vec<_> = (0..10).map(|i| row(i, 0, [i as f64, (i * i) as f64, 3.0, 1.0, -(i as f64), 2.0])).collect();
        let s = normalize(DatasetSplit { name: SplitName::Ds1, train_rows: train, test_rows: vec![], normalization: None }).unwrap();
        let raw = [4.0, 16.0, 3.0, 1.0, -4.0, 2.0];
        let once = s.clone();
        let twice = normalize(s).unwrap();
        assert_eq!(twice.train_rows, once.train_rows);
        let norm = twice.normalization.unwrap();
        for (a, b) in norm.apply(&raw).iter().zip(once.normalization.unwrap().apply(&raw)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn split_sizes() {
        let rows = |n: usize| (0..n).map(|i| row(i as u64, 0, [0.0; 6])).collect::<Vec<_>>();
        let r70k = rows(70_000);
        let s = split(&r70k, SplitName::Ds1).unwrap();
        assert_eq!((s.train_rows.len(), s.test_rows.len()), (40_000, 30_000));
        let s = split(&r70k, SplitName::Ds2).unwrap();
        assert_eq!((s.train_rows.len(), s.test_rows.len()), (15_000, 55_000));
        let s = split(&rows(1400), SplitName::Ds3).unwrap();
        assert_eq!((s.train_rows.len(), s.test_rows.len()), (150, 1250));
        let s = split(&rows(7000), SplitName::Ds1).unwrap();
        assert_eq!((s.train_rows.len(), s.test_rows.len()), (4000, 3000));
        assert_eq!(s.train_rows[0].bucket_start, 0);
        assert_eq!(split(&r70k, SplitName::Ds1).unwrap(), split(&r70k, SplitName::Ds1).unwrap());
        assert!(matches!(split(&rows(1), SplitName::Ds3), Err(Error::Data(_))));
    }

    #[test]
    fn split_names_parse() {
        assert_eq!("DS-3".parse::<SplitName>().unwrap(), SplitName::Ds3);
        assert_eq!(SplitName::Ds2.to_string(), "DS-2");
        assert!("DS-4".parse::<SplitName>().is_err());
    }

    #[test]
    fn empty_csv_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bsm.csv");
        std::fs::write(&p, "time_s,vehicle_id,zone_id,speed_mps\n").unwrap();
        assert!(read_bsm_csv(&p).unwrap().is_empty());
        let p = dir.path().join("f.csv");
        write_feature_csv(&[], &p).unwrap();
        assert!(read_feature_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn csv_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bsm.csv");
        std::fs::write(&p, "time_s,vehicle_id,zone_id,speed_mps\n0,a,1,3.5\n1,b,1,-2\n").unwrap();
        match read_bsm_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "time_s,vehicle_id,zone_id,speed_mps\n0,a,1,3.5\nx,b,1,2\n").unwrap();
        match read_bsm_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "t,vehicle_id,zone_id,speed_mps\n").unwrap();
        assert!(matches!(read_bsm_csv(&p), Err(Error::Format { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn feature_csv_round_trip(values in proptest::collection::vec((0u64..5000, 0usize..56, proptest::array::uniform6(0.0f64..1e3), 0u8..=1), 0..1000)) {
            let rows: Vec<FeatureRow> = values
                .into_iter()
                .map(|(b, z, features, label)| FeatureRow { bucket_start: b, zone_id: z, features, label })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("f.csv");
            write_feature_csv(&rows, &p).unwrap();
            prop_assert_eq!(read_feature_csv(&p).unwrap(), rows);
        }

        #[test]
        fn bsm_csv_round_trip(values in proptest::collection::vec((0u64..5000, 0usize..56, 0.0f64..60.0), 0..200)) {
            let records: Vec<BsmRecord> = values
                .into_iter()
                .enumerate()
                .map(|(i, (t, z, s))| BsmRecord { time: t, vehicle_id: format!("cv-{i}"), zone_id: z, speed: s })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("b.csv");
            write_bsm_csv(&records, &p).unwrap();
            prop_assert_eq!(read_bsm_csv(&p).unwrap(), records);
        }

        #[test]
        fn train_features_land_in_unit_interval(values in proptest::collection::vec(proptest::array::uniform6(-50.0f64..50.0), 1..40)) {
            let rows: Vec<FeatureRow> = values.into_iter().map(|f| row(0, 0, f)).collect();
            let s = normalize(DatasetSplit { name: SplitName::Ds3, train_rows: rows, test_rows: vec![], normalization: None }).unwrap();
            for r in &s.train_rows {
                prop_assert!(r.features.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
