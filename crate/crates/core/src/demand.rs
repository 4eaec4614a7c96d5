//! Arrival generation from per-stream hourly counts, RV/HV assignment, and
//! GEH validation of simulated flows.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::stream::{StreamId, CANONICAL};
use crate::vehicle::{VehicleId, VehicleKind};
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrivalModel {
    Poisson,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    /// Vehicles per hour, indexed canonically.
    pub counts: [f64; 12],
    pub arrival_model: ArrivalModel,
    pub rv_rate: f64,
}

impl DemandProfile {
    /// The same hourly count on every listed stream.
    pub fn uniform(streams: &[StreamId], per_stream: f64, model: ArrivalModel, rv_rate: f64) -> Self {
        let mut counts = [0.0; 12];
        for s in streams {
            counts[s.index()] = per_stream;
        }
        DemandProfile {
            counts,
            arrival_model: model,
            rv_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument("demand counts must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.rv_rate) {
            return Err(Error::InvalidArgument(format!("rv_rate {} outside [0, 1]", self.rv_rate)));
        }
        Ok(())
    }
}

/// Arrival times in `[0, horizon)` for each stream with positive count,
/// merged and sorted by time, then canonical stream order.
pub fn arrivals(profile: &DemandProfile, streams: &[StreamId], horizon: f64, rng: &mut SimRng) -> Vec<(f64, StreamId)> {
    let mut out = Vec::new();
    for &s in streams {
        let count = profile.counts[s.index()];
        if count <= 0.0 {
            continue;
        }
        let rate = count / 3600.0;
        match profile.arrival_model {
            ArrivalModel::Uniform => {
                let headway = 1.0 / rate;
                let mut k = 0u64;
                loop {
                    let t = k as f64 * headway;
                    if t >= horizon {
                        break;
                    }
                    out.push((t, s));
                    k += 1;
                }
            }
            ArrivalModel::Poisson => {
                let exp = Exp::new(rate).expect("positive rate");
                let mut t = exp.sample(rng);
                while t < horizon {
                    out.push((t, s));
                    t += exp.sample(rng);
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.index().cmp(&b.1.index())));
    out
}

/// Kind assignment for one spawned vehicle. A draw below `online_rate`
/// yields a controlled RV, below `rv_rate` an RV that is already offline,
/// otherwise an HV.
pub fn draw_kind(rv_rate: f64, online_rate: f64, rng: &mut SimRng) -> (VehicleKind, bool) {
    let u: f64 = rng.random();
    if u < online_rate.min(rv_rate) {
        (VehicleKind::Rv, false)
    } else if u < rv_rate {
        (VehicleKind::Rv, true)
    } else {
        (VehicleKind::Hv, false)
    }
}

/// Stateful spawner: releases scheduled arrivals into per-stream backlogs and
/// inserts vehicles when the entry gap allows.
#[derive(Debug, Clone)]
pub struct Spawner {
    schedule: Vec<(f64, StreamId)>,
    next: usize,
    backlog: [VecDeque<f64>; 12],
    pub rv_rate: f64,
    /// Rate of RVs that remain under automation; lowered by RV-rate drops.
    pub online_rate: f64,
    spawned: usize,
}

impl Spawner {
    pub fn new(schedule: Vec<(f64, StreamId)>, rv_rate: f64) -> Self {
        Spawner {
            schedule,
            next: 0,
            backlog: Default::default(),
            rv_rate,
            online_rate: rv_rate,
            spawned: 0,
        }
    }

    /// Arrivals released so far (spawned plus backlogged).
    pub fn released(&self) -> usize {
        self.next
    }

    pub fn spawned(&self) -> usize {
        self.spawned
    }

    pub fn backlog_len(&self) -> usize {
        self.backlog.iter().map(VecDeque::len).sum()
    }

    /// Releases arrivals due by time `t` and spawns what fits. Each stream
    /// fills its lanes front-first; at most one vehicle enters per lane per
    /// call since a fresh insertion blocks its own lane's entry gap.
    pub fn spawn_due(&mut self, world: &mut World, t: f64, kind_rng: &mut SimRng) -> Vec<VehicleId> {
        while self.next < self.schedule.len() && self.schedule[self.next].0 <= t {
            let (at, s) = self.schedule[self.next];
            self.backlog[s.index()].push_back(at);
            self.next += 1;
        }
        let mut ids = Vec::new();
        for s in CANONICAL {
            while !self.backlog[s.index()].is_empty() {
                let lane = world.least_occupied_lane(s);
                if !world.can_insert(s, lane) {
                    break;
                }
                let (kind, offline) = draw_kind(self.rv_rate, self.online_rate, kind_rng);
                let Some(id) = world.try_spawn(s, lane, kind) else {
                    break;
                };
                if offline {
                    if let Some(v) = world.get_mut(id) {
                        v.offline = true;
                    }
                }
                self.backlog[s.index()].pop_front();
                self.spawned += 1;
                ids.push(id);
            }
        }
        ids
    }
}

/// GEH flow-similarity statistic between a simulated and an observed count.
pub fn geh(m: f64, c: f64) -> f64 {
    if m + c <= 0.0 {
        return 0.0;
    }
    (2.0 * (m - c).powi(2) / (m + c)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GehReport {
    /// `(stream, simulated v/h, configured v/h, GEH)` for each stream with demand.
    pub per_stream: Vec<(StreamId, f64, f64, f64)>,
    pub mean: f64,
}

impl GehReport {
    pub fn passes(&self) -> bool {
        self.per_stream.iter().all(|r| r.3 < 5.0)
    }
}

/// Compares entries per stream over the last `window` seconds of a run with
/// the configured hourly counts. `entries` holds `(time, stream)` of every
/// entrance crossing; `run_length` is the simulated duration.
pub fn validate_demand(entries: &[(f64, StreamId)], run_length: f64, profile: &DemandProfile, streams: &[StreamId], window: f64) -> Result<GehReport> {
    if window < 3600.0 {
        return Err(Error::InvalidArgument(format!("validation window {window} s is shorter than one hour")));
    }
    if run_length < window {
        return Err(Error::RunTooShort { run_s: run_length, window_s: window });
    }
    let start = run_length - window;
    let mut per_stream = Vec::new();
    for &s in streams {
        let configured = profile.counts[s.index()];
        let n = entries.iter().filter(|(t, x)| *x == s && *t >= start).count() as f64;
        let simulated = n * 3600.0 / window;
        if configured <= 0.0 && simulated <= 0.0 {
            continue;
        }
        per_stream.push((s, simulated, configured, geh(simulated, configured)));
    }
    let mean = if per_stream.is_empty() {
        0.0
    } else {
        per_stream.iter().map(|r| r.3).sum::<f64>() / per_stream.len() as f64
    };
    Ok(GehReport { per_stream, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idm::IdmParams;
    use crate::intersection::{build_intersection, IntersectionSpec};
    use crate::rng::{substream, Substream};
    use crate::stream::Mode;

    fn sid(s: &str) -> StreamId {
        s.parse().unwrap()
    }

    #[test]
    fn uniform_headway() {
        let p = DemandProfile::uniform(&[sid("E-C")], 360.0, ArrivalModel::Uniform, 0.0);
        let a = arrivals(&p, &[sid("E-C")], 100.0, &mut substream(1, Substream::Demand));
        let times: Vec<f64> = a.iter().map(|x| x.0).collect();
        assert_eq!(times, vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]);
    }

    #[test]
    fn zero_count_is_silent() {
        let p = DemandProfile::uniform(&[], 0.0, ArrivalModel::Poisson, 0.5);
        assert!(arrivals(&p, Mode::EightDirection.streams(), 1e4, &mut substream(1, Substream::Demand)).is_empty());
    }

    #[test]
    fn poisson_rate_within_three_sigma() {
        let s = sid("N-L");
        let p = DemandProfile::uniform(&[s], 720.0, ArrivalModel::Poisson, 0.0);
        let horizon = 1e5;
        let n = arrivals(&p, &[s], horizon, &mut substream(9, Substream::Demand)).len() as f64;
        let mean = 0.2 * horizon;
        assert!((n - mean).abs() < 3.0 * mean.sqrt(), "{n}");
    }

    #[test]
    fn kind_fraction_within_three_sigma() {
        let mut rng = substream(3, Substream::Kind);
        let n = 10_000;
        let rv = (0..n).filter(|_| draw_kind(0.6, 0.6, &mut rng).0 == VehicleKind::Rv).count() as f64;
        let sigma = (n as f64 * 0.6 * 0.4).sqrt();
        assert!((rv - 6000.0).abs() < 3.0 * sigma, "{rv}");
    }

    #[test]
    fn full_rate_is_all_rv() {
        let mut rng = substream(3, Substream::Kind);
        assert!((0..1000).all(|_| draw_kind(1.0, 1.0, &mut rng) == (VehicleKind::Rv, false)));
    }

    #[test]
    fn blocked_lane_backlogs_and_conserves() {
        let x = build_intersection(IntersectionSpec::canonical()).unwrap();
        let mut w = World::new(x, IdmParams::default());
        let s = sid("W-C");
        let mut blocker = w.make_vehicle(s, 0, VehicleKind::Hv, -148.0, 0.0);
        blocker.entry_granted = false;
        w.insert(blocker);
        let sched = vec![(0.0, s), (0.5, s), (2.0, s)];
        let mut sp = Spawner::new(sched, 0.0);
        let mut rng = substream(1, Substream::Kind);
        sp.spawn_due(&mut w, 1.0, &mut rng);
        assert_eq!(sp.spawned(), 0);
        assert_eq!(sp.backlog_len(), 2);
        assert_eq!(sp.released(), sp.spawned() + sp.backlog_len());
        w.vehicles.clear();
        sp.spawn_due(&mut w, 2.0, &mut rng);
        assert_eq!(sp.spawned(), 1);
        assert_eq!(sp.released(), 3);
        assert_eq!(sp.released(), sp.spawned() + sp.backlog_len());
    }

    #[test]
    fn geh_values() {
        assert_eq!(geh(100.0, 100.0), 0.0);
        assert!((geh(105.0, 100.0) - (50.0f64 / 205.0).sqrt()).abs() < 1e-12);
        assert!((geh(105.0, 100.0) - 0.4939).abs() < 1e-4);
        assert_eq!(geh(0.0, 0.0), 0.0);
        let halved = geh(350.0, 700.0);
        assert!((halved - (2.0 * 350.0f64.powi(2) / 1050.0).sqrt()).abs() < 1e-12);
        assert!(halved > 5.0);
    }

    #[test]
    fn validation_rejects_short_runs() {
        let p = DemandProfile::uniform(&[sid("E-C")], 360.0, ArrivalModel::Uniform, 0.0);
        assert!(matches!(
            validate_demand(&[], 1000.0, &p, &[sid("E-C")], 3600.0),
            Err(Error::RunTooShort { .. })
        ));
    }

    #[test]
    fn exact_counts_give_zero_geh() {
        let s = sid("E-C");
        let p = DemandProfile::uniform(&[s], 360.0, ArrivalModel::Uniform, 0.0);
        let entries: Vec<(f64, StreamId)> = (0..720).map(|k| (k as f64 * 10.0 + 3.0, s)).collect();
        let r = validate_demand(&entries, 7200.0, &p, &[s], 3600.0).unwrap();
        assert_eq!(r.mean, 0.0);
        assert!(r.passes());
    }
}
