//! Synthetic corridor traffic with scheduled lane-blocking incidents.
//!
//! Zones are modelled at the statistics level: every (zone, second) draws a
//! Poisson vehicle count and normal per-vehicle speeds around an envelope.
//! An incident holds its zone near a crawl, grows a queue in the approach-side
//! neighbor and starves the departure-side neighbor; afterwards all three relax
//! linearly back to free flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{BsmRecord, ZoneTopology};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IncidentEvent {
    pub zone: usize,
    pub start_s: u64,
    pub duration_s: u64,
}

impl IncidentEvent {
    pub fn end_s(&self) -> u64 {
        self.start_s + self.duration_s
    }
}

/// Where the incident schedule comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSource {
    /// Drawn by [`default_schedule`]; `None` picks the count from the prevalence target.
    Auto { n_incidents: Option<usize> },
    Explicit(Vec<IncidentEvent>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_zones: usize,
    pub n_directions: usize,
    pub duration_s: u64,
    pub free_flow_speed: f64,
    pub speed_noise_sd: f64,
    /// Mean vehicles per zone-second.
    pub demand_rate: f64,
    pub schedule: ScheduleSource,
    /// Fraction of zone-seconds labeled positive when the incident count is automatic.
    pub target_prevalence: f64,
    pub min_incident_s: u64,
    pub max_incident_s: u64,
    /// Mean speed inside a blocked zone.
    pub incident_speed: f64,
    /// Approach-side mean speed reached at the end of an incident.
    pub queue_speed: f64,
    /// Approach-side count multiplier grows from 1 to 1 + queue_growth.
    pub queue_growth: f64,
    /// Departure-side count multiplier falls from 1 to 1 − starvation.
    pub starvation: f64,
    pub recovery_s: u64,
    /// Probability each vehicle reports (uniform thinning).
    pub penetration: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_zones: 56,
            n_directions: 2,
            duration_s: 1250,
            free_flow_speed: 30.0,
            speed_noise_sd: 2.0,
            demand_rate: 4.0,
            schedule: ScheduleSource::Auto { n_incidents: None },
            target_prevalence: 0.012,
            min_incident_s: 40,
            max_incident_s: 90,
            incident_speed: 2.0,
            queue_speed: 5.0,
            queue_growth: 1.5,
            starvation: 1.0,
            recovery_s: 15,
            penetration: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn topology(&self) -> Result<ZoneTopology> {
        ZoneTopology::corridor(self.n_zones, self.n_directions)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology()?;
        let positive = [
            self.free_flow_speed,
            self.demand_rate,
            self.target_prevalence,
        ];
        if self.duration_s == 0 || positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("duration, free-flow speed, demand and prevalence must be positive"));
        }
        let non_negative = [
            self.speed_noise_sd,
            self.incident_speed,
            self.queue_speed,
            self.queue_growth,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("speeds, noise and queue growth must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.starvation) || !(self.penetration > 0.0 && self.penetration <= 1.0) {
            return Err(Error::config("starvation must lie in [0, 1] and penetration in (0, 1]"));
        }
        if self.min_incident_s == 0 || self.min_incident_s > self.max_incident_s {
            return Err(Error::config("incident durations need 0 < min <= max"));
        }
        if let ScheduleSource::Explicit(events) = &self.schedule {
            validate_schedule(events, self.n_zones, self.duration_s)?;
        }
        Ok(())
    }
}

pub fn validate_schedule(events: &[IncidentEvent], n_zones: usize, duration_s: u64) -> Result<()> {
    for e in events {
        if e.zone >= n_zones || e.duration_s == 0 || e.start_s >= duration_s {
            return Err(Error::config(format!(
                "incident {e:?} must have zone < {n_zones}, positive duration and start < {duration_s}"
            )));
        }
    }
    Ok(())
}

/// The zones an incident disturbs: itself, its approach side and departure side.
fn footprint(topology: &ZoneTopology, zone: usize) -> Vec<usize> {
    let mut zones = vec![zone];
    for run in &topology.directions {
        if let Some(pos) = run.iter().position(|&z| z == zone) {
            zones.extend(pos.checked_sub(1).map(|p| run[p]));
            zones.extend(run.get(pos + 1).copied());
        }
    }
    zones
}

/// Non-overlapping incidents with durations in `[min_incident_s, max_incident_s]`.
///
/// Start times are stratified over the horizon so every stretch of the run sees
/// incidents. Two incidents may not disturb a common zone while either is active
/// or recovering. With `n_incidents = None`, incidents are added until the
/// labeled zone-seconds reach `target_prevalence`.
pub fn default_schedule<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    n_incidents: Option<usize>,
    rng: &mut R,
) -> Result<Vec<IncidentEvent>> {
    let topology = config.topology()?;
    let horizon = config.duration_s;
    let durations: Vec<u64> = match n_incidents {
        Some(n) => (0..n)
            .map(|_| rng.random_range(config.min_incident_s..=config.max_incident_s))
            .collect(),
        None => {
            let target = config.target_prevalence * (config.n_zones as u64 * horizon) as f64;
            let mut out = Vec::new();
            let mut total = 0u64;
            while (total as f64) < target {
                let d = rng.random_range(config.min_incident_s..=config.max_incident_s);
                total += d;
                out.push(d);
            }
            out
        }
    };
    if durations.iter().any(|&d| d > horizon) {
        return Err(Error::config(format!("incident durations exceed the {horizon} s horizon")));
    }

    let slot = horizon as f64 / durations.len().max(1) as f64;
    let mut events: Vec<IncidentEvent> = Vec::with_capacity(durations.len());
    for (i, &duration) in durations.iter().enumerate() {
        let latest = horizon - duration;
        let lo = ((i as f64 * slot) as u64).min(latest);
        let hi = (((i + 1) as f64 * slot) as u64).clamp(lo + 1, latest + 1);
        let mut placed = None;
        for _ in 0..1000 {
            let candidate = IncidentEvent {
                zone: rng.random_range(0..config.n_zones),
                start_s: rng.random_range(lo..hi),
                duration_s: duration,
            };
            let zones = footprint(&topology, candidate.zone);
            let clash = events.iter().any(|e| {
                let busy = |a: &IncidentEvent| (a.start_s, a.end_s() + config.recovery_s);
                let (s1, e1) = busy(e);
                let (s2, e2) = busy(&candidate);
                s1 < e2 && s2 < e1 && footprint(&topology, e.zone).iter().any(|z| zones.contains(z))
            });
            if !clash {
                placed = Some(candidate);
                break;
            }
        }
        let event = placed.ok_or_else(|| {
            Error::config(format!("cannot place {} incidents without overlap", durations.len()))
        })?;
        events.push(event);
    }
    events.sort_by_key(|e| (e.start_s, e.zone));
    Ok(events)
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Blocked,
    Approach,
    Departure,
}

#[derive(Debug, Clone, Copy)]
struct Envelope {
    speed: f64,
    count: f64,
}

impl ScenarioConfig {
    fn baseline(&self) -> Envelope {
        Envelope {
            speed: self.free_flow_speed,
            count: self.demand_rate,
        }
    }

    /// Envelope during an incident at progress `p` in [0, 1].
    fn disturbed(&self, role: Role, p: f64) -> Envelope {
        let base = self.baseline();
        match role {
            Role::Blocked => Envelope {
                speed: self.incident_speed,
                count: base.count,
            },
            Role::Approach => Envelope {
                speed: base.speed - (base.speed - self.queue_speed) * p,
                count: base.count * (1.0 + self.queue_growth * p),
            },
            Role::Departure => Envelope {
                speed: base.speed,
                count: base.count * (1.0 - self.starvation * p),
            },
        }
    }

    fn envelope(&self, effects: &[(Role, IncidentEvent)], t: u64) -> Envelope {
        let base = self.baseline();
        for &(role, e) in effects {
            if t >= e.start_s && t < e.end_s() {
                let p = (t - e.start_s) as f64 / e.duration_s as f64;
                return self.disturbed(role, p);
            }
            if t >= e.end_s() && t < e.end_s() + self.recovery_s {
                let end = self.disturbed(role, 1.0);
                let r = (t - e.end_s()) as f64 / self.recovery_s as f64;
                return Envelope {
                    speed: end.speed + (base.speed - end.speed) * r,
                    count: end.count + (base.count - end.count) * r,
                };
            }
        }
        base
    }
}

/// Records ordered by `(time, zone)` plus the schedule that produced them.
/// Each zone draws from its own stream of the seeded generator.
pub fn generate(config: &ScenarioConfig) -> Result<(Vec<BsmRecord>, Vec<IncidentEvent>)> {
    config.validate()?;
    let topology = config.topology()?;
    let schedule = match &config.schedule {
        ScheduleSource::Explicit(events) => events.clone(),
        ScheduleSource::Auto { n_incidents } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(0);
            default_schedule(config, *n_incidents, &mut rng)?
        }
    };

    let mut effects: Vec<Vec<(Role, IncidentEvent)>> = vec![Vec::new(); config.n_zones];
    for &e in &schedule {
        effects[e.zone].push((Role::Blocked, e));
        for run in &topology.directions {
            if let Some(pos) = run.iter().position(|&z| z == e.zone) {
                if let Some(p) = pos.checked_sub(1) {
                    effects[run[p]].push((Role::Approach, e));
                }
                if let Some(&next) = run.get(pos + 1) {
                    effects[next].push((Role::Departure, e));
                }
            }
        }
    }

    let mut per_zone = Vec::with_capacity(config.n_zones);
    for (zone, zone_effects) in effects.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(zone as u64 + 1);
        let mut records = Vec::new();
        for t in 0..config.duration_s {
            let env = config.envelope(zone_effects, t);
            let count = if env.count > 0.0 {
                Poisson::new(env.count).expect("positive rate").sample(&mut rng) as u64
            } else {
                0
            };
            let speed = Normal::new(env.speed, config.speed_noise_sd).expect("finite sd");
            for k in 0..count {
                let v = speed.sample(&mut rng).max(0.0);
                if config.penetration < 1.0 && !rng.random_bool(config.penetration) {
                    continue;
                }
                records.push(BsmRecord {
                    time: t,
                    vehicle_id: format!("cv-{zone}-{t}-{k}"),
                    zone_id: zone,
                    speed: v,
                });
            }
        }
        per_zone.push(records);
    }
    let mut records: Vec<BsmRecord> = per_zone.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.time, r.zone_id));
    Ok((records, schedule))
}
