//! Evaluation quantities computed from run logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::runlog::{RunLog, StepRecord, VehicleRecord};
use crate::stream::StreamId;
use crate::vehicle::{VehicleId, Zone};

pub const DEFAULT_CL_THRESHOLD: f64 = 46.5;
pub const CONGESTION_SPEED: f64 = 1.0;
pub const CONGESTION_STEPS: usize = 60;
pub const SLOPE_WINDOW: usize = 500;

/// Which per-vehicle waiting quantity metrics use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WaitMode {
    /// Sum of all still intervals in the control zone.
    #[default]
    Accumulated,
    /// Longest single still interval.
    MaxInterval,
}

impl std::fmt::Display for WaitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WaitMode::Accumulated => "accumulated",
            WaitMode::MaxInterval => "max_interval",
        })
    }
}

impl std::str::FromStr for WaitMode {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "accumulated" => Ok(WaitMode::Accumulated),
            "max_interval" => Ok(WaitMode::MaxInterval),
            _ => Err(crate::error::Error::Parse(format!("unknown wait mode `{s}`"))),
        }
    }
}

pub fn wait_of(v: &VehicleRecord, mode: WaitMode) -> f64 {
    match mode {
        WaitMode::Accumulated => v.wait_accum,
        WaitMode::MaxInterval => v.wait_max,
    }
}

/// Metric scope: one direction or the whole intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Intersection,
    Direction(StreamId),
}

impl Scope {
    fn contains(&self, v: &VehicleRecord) -> bool {
        match self {
            Scope::Intersection => true,
            Scope::Direction(s) => v.stream == *s,
        }
    }
}

/// Half-open range of step-record indices.
pub type Window = std::ops::Range<usize>;

pub fn full(log: &RunLog) -> Window {
    0..log.steps.len()
}

/// Value with a flag marking an empty scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub empty: bool,
}

/// Mean waiting time over every vehicle seen in the control zone during the
/// window, each taken at its last record in the window.
pub fn awt(log: &RunLog, scope: Scope, window: Window, mode: WaitMode) -> Flagged {
    let mut last: BTreeMap<VehicleId, f64> = BTreeMap::new();
    for rec in &log.steps[window] {
        for v in &rec.vehicles {
            if v.zone == Zone::ControlZone && scope.contains(v) {
                last.insert(v.id, wait_of(v, mode));
            } else if last.contains_key(&v.id) {
                // Left the zone within the window: its wait is final.
                last.insert(v.id, wait_of(v, mode));
            }
        }
    }
    if last.is_empty() {
        return Flagged { value: 0.0, empty: true };
    }
    Flagged {
        value: last.values().sum::<f64>() / last.len() as f64,
        empty: false,
    }
}

/// Mean waiting time of the vehicles in the control zone at one step.
pub fn awt_now(rec: &StepRecord, scope: Scope, mode: WaitMode) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in rec.vehicles.iter().filter(|v| v.zone == Zone::ControlZone && scope.contains(v)) {
        sum += wait_of(v, mode);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn awt_series(log: &RunLog, scope: Scope, mode: WaitMode) -> Vec<f64> {
    log.steps.iter().map(|r| awt_now(r, scope, mode)).collect()
}

pub fn congestion_level(awt: f64, threshold: f64) -> f64 {
    (awt / threshold).clamp(0.0, 1.0)
}

/// `(conflicting decisions, decisions)` in the window.
pub fn conflict_counts(log: &RunLog, window: Window) -> (usize, usize) {
    log.steps[window].iter().fold((0, 0), |(c, n), r| {
        (c + r.decisions.iter().filter(|d| d.conflict).count(), n + r.decisions.len())
    })
}

/// Conflicting Go decisions over all RV decisions; `None` without decisions.
pub fn conflict_rate(log: &RunLog, window: Window) -> Option<f64> {
    let (c, n) = conflict_counts(log, window);
    if n == 0 {
        None
    } else {
        Some(c as f64 / n as f64)
    }
}

/// Least-squares slope of the last `window` points against their index.
pub fn awt_slope(series: &[f64], window: usize) -> f64 {
    let ys = &series[series.len().saturating_sub(window)..];
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let mx = (n - 1) as f64 / 2.0;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Mean speed over vehicles in the control zone or inside the box.
pub fn avg_speed_now(rec: &StepRecord) -> Option<f64> {
    speed_of(&rec.vehicles)
}

pub fn speed_of(vehicles: &[VehicleRecord]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in vehicles.iter().filter(|v| matches!(v.zone, Zone::ControlZone | Zone::Inside)) {
        sum += v.v;
        n += 1;
    }
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// Mean of the per-step average speeds over steps where it is defined.
pub fn avg_speed(log: &RunLog, window: Window) -> Option<f64> {
    let xs: Vec<f64> = log.steps[window].iter().filter_map(avg_speed_now).collect();
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Tracks runs of sub-threshold average speed.
#[derive(Debug, Clone, Default)]
pub struct CongestionDetector {
    run: usize,
    pub triggered: bool,
}

impl CongestionDetector {
    /// Feeds one step's average speed (`None` when no vehicle is present).
    pub fn push(&mut self, speed: Option<f64>) -> bool {
        match speed {
            Some(s) if s < CONGESTION_SPEED => self.run += 1,
            _ => self.run = 0,
        }
        if self.run >= CONGESTION_STEPS {
            self.triggered = true;
        }
        self.triggered
    }

    pub fn run_length(&self) -> usize {
        self.run
    }
}

pub fn congested(log: &RunLog, window: Window) -> bool {
    let mut d = CongestionDetector::default();
    for r in &log.steps[window] {
        d.push(avg_speed_now(r));
    }
    d.triggered
}

/// Vehicles that crossed the entrance in the window.
pub fn throughput(log: &RunLog, window: Window) -> usize {
    log.steps[window].iter().map(|r| r.entered.len()).sum()
}

/// Total still time in the control zone over the window, vehicle-seconds.
pub fn cumulative_wait(log: &RunLog, window: Window) -> f64 {
    log.steps[window].iter().map(|r| still_in_zone(&r.vehicles) as f64).sum()
}

pub fn still_in_zone(vehicles: &[VehicleRecord]) -> usize {
    vehicles
        .iter()
        .filter(|v| v.zone == Zone::ControlZone && v.v < crate::vehicle::STILL_SPEED)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControllerKind;
    use crate::vehicle::VehicleKind;

    fn veh(id: u64, v: f64, wait: f64, zone: Zone) -> VehicleRecord {
        VehicleRecord {
            id,
            kind: VehicleKind::Hv,
            offline: false,
            stream: "E-C".parse().unwrap(),
            lane: 0,
            s: -10.0,
            v,
            zone,
            wait_accum: wait,
            wait_max: wait / 2.0,
            entry_granted: false,
        }
    }

    fn step(k: u64, vehicles: Vec<VehicleRecord>) -> StepRecord {
        StepRecord {
            step: k,
            controller: ControllerKind::NoTl,
            event: None,
            vehicles,
            decisions: vec![],
            grants: vec![],
            entered: vec![],
            exited: vec![],
            conflicts: vec![],
        }
    }

    #[test]
    fn awt_is_mean_of_waits() {
        let mut log = RunLog::default();
        log.push(step(
            1,
            vec![veh(1, 0.0, 0.0, Zone::ControlZone), veh(2, 0.0, 10.0, Zone::ControlZone), veh(3, 0.0, 20.0, Zone::ControlZone)],
        ));
        let a = awt(&log, Scope::Intersection, full(&log), WaitMode::Accumulated);
        assert_eq!(a, Flagged { value: 10.0, empty: false });
        assert_eq!(awt(&log, Scope::Intersection, full(&log), WaitMode::MaxInterval).value, 5.0);
        let empty = awt(&log, Scope::Direction("N-C".parse().unwrap()), full(&log), WaitMode::Accumulated);
        assert!(empty.empty);
    }

    #[test]
    fn congestion_levels() {
        assert_eq!(congestion_level(0.0, 46.5), 0.0);
        assert_eq!(congestion_level(93.0, 46.5), 1.0);
        assert_eq!(congestion_level(23.25, 46.5), 0.5);
    }

    #[test]
    fn slopes() {
        assert_eq!(awt_slope(&[3.0; 10], 500), 0.0);
        let lin: Vec<f64> = (0..700).map(|t| t as f64).collect();
        assert!((awt_slope(&lin, 500) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speed_and_congestion() {
        let mut log = RunLog::default();
        for k in 0..100 {
            log.push(step(k + 1, vec![veh(1, 0.0, 0.0, Zone::ControlZone)]));
        }
        assert!(congested(&log, full(&log)));
        let mut log = RunLog::default();
        for k in 0..100 {
            log.push(step(k + 1, vec![veh(1, 0.0, 0.0, Zone::ControlZone), veh(2, 2.0, 0.0, Zone::Inside)]));
        }
        assert_eq!(avg_speed(&log, full(&log)), Some(1.0));
        assert!(!congested(&log, full(&log)));
        let mut d = CongestionDetector::default();
        for _ in 0..59 {
            d.push(Some(0.5));
        }
        assert!(!d.triggered);
        d.push(None);
        assert_eq!(d.run_length(), 0);
    }
}
