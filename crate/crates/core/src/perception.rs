//! Observation encoding: per-direction queue length and waiting time,
//! per-direction interior occupancy, and the ego distance to the entrance.

use crate::error::{Error, Result};
use crate::intersection::Intersection;
use crate::stream::StreamId;
use crate::vehicle::{Vehicle, Zone};
use crate::world::World;

pub const SEGMENTS: usize = 10;
/// Waiting-time normaliser, seconds.
pub const W_MAX: f64 = 200.0;
/// Extra slack on top of `s0` under which a slow vehicle counts as blocked
/// by a queued leader.
pub const QUEUE_GAP_SLACK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsSource {
    GroundTruth,
    V2v,
}

/// Unscaled observation of one RV.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `(l_j, w_j)` per direction in mode order; zero for inactive directions.
    pub stats: Vec<(f64, f64)>,
    pub occupancy: Vec<[bool; SEGMENTS]>,
    pub d: f64,
}

pub fn encoded_len(directions: usize) -> usize {
    12 * directions + 1
}

/// Queue capacity of direction `j` inside the control zone, in vehicles.
pub fn queue_capacity(lanes: u32, radius: f64, footprint: f64) -> f64 {
    lanes as f64 * (radius / footprint).floor()
}

fn in_control_zone(v: &Vehicle) -> bool {
    v.zone == Zone::ControlZone
}

/// Ground-truth `(l, w)` of stream `j`: queued vehicles in the control zone,
/// and the mean accumulated wait of all vehicles in the control zone.
pub fn ground_truth_stream_stats(world: &World, j: StreamId) -> (f64, f64) {
    let p = &world.params;
    let mut queued = 0usize;
    let mut wait_sum = 0.0;
    let mut n = 0usize;
    for lane in 0..world.intersection.lanes(j) {
        let mut lane_vs: Vec<&Vehicle> = world
            .vehicles
            .iter()
            .filter(|v| v.stream == j && v.lane == lane && in_control_zone(v))
            .collect();
        lane_vs.sort_by(|a, b| b.s.total_cmp(&a.s));
        // Front-to-back walk; a vehicle is queued if still, or blocked close
        // behind a queued vehicle.
        let mut prev: Option<(f64, bool)> = None;
        for v in lane_vs {
            let blocked = prev.is_some_and(|(lead_s, lead_q)| lead_q && lead_s - p.vehicle_length - v.s < p.s0 + QUEUE_GAP_SLACK);
            let q = v.is_still() || blocked;
            if q {
                queued += 1;
            }
            wait_sum += v.wait_accum;
            n += 1;
            prev = Some((v.s, q));
        }
    }
    let w = if n == 0 { 0.0 } else { wait_sum / n as f64 };
    (queued as f64, w)
}

pub fn ground_truth_stats(world: &World) -> Vec<(f64, f64)> {
    world
        .intersection
        .mode()
        .streams()
        .iter()
        .map(|&j| {
            if world.intersection.is_active(j) {
                ground_truth_stream_stats(world, j)
            } else {
                (0.0, 0.0)
            }
        })
        .collect()
}

/// Segment flags of stream `j`'s inner path, from each vehicle's front
/// position as a fraction of the path length.
pub fn occupancy_map(world: &World, j: StreamId) -> [bool; SEGMENTS] {
    let mut m = [false; SEGMENTS];
    let len = world.intersection.path_length(j);
    if len <= 0.0 {
        return m;
    }
    for v in world.vehicles.iter().filter(|v| v.stream == j) {
        if v.s <= 0.0 || v.s > len {
            continue;
        }
        let f = v.s / len;
        let k = ((f * SEGMENTS as f64).floor() as usize).min(SEGMENTS - 1);
        m[k] = true;
    }
    m
}

/// Own queue extent and waiting time that a stopped RV in the control zone
/// shares; `None` for moving or out-of-zone vehicles.
pub fn ego_estimates(v: &Vehicle, footprint: f64) -> Option<(f64, f64)> {
    if !(v.is_controlled_rv() && in_control_zone(v) && v.is_still()) {
        return None;
    }
    Some((v.distance_to_entrance() / footprint, v.wait_accum))
}

/// Builds the observation of `ego` from the given per-direction stats.
pub fn encode_observation(ego: &Vehicle, stats: &[(f64, f64)], world: &World) -> Result<Observation> {
    if !in_control_zone(ego) {
        return Err(Error::OutsideControlZone(ego.id));
    }
    let x = &world.intersection;
    let streams = x.mode().streams();
    let mut s = Vec::with_capacity(streams.len());
    let mut occupancy = Vec::with_capacity(streams.len());
    for (k, &j) in streams.iter().enumerate() {
        if x.is_active(j) {
            s.push(stats.get(k).copied().unwrap_or((0.0, 0.0)));
            occupancy.push(occupancy_map(world, j));
        } else {
            s.push((0.0, 0.0));
            occupancy.push([false; SEGMENTS]);
        }
    }
    Ok(Observation {
        stats: s,
        occupancy,
        d: ego.distance_to_entrance(),
    })
}

impl Observation {
    /// Network input: scaled stats, then occupancy flags, then distance.
    pub fn features(&self, x: &Intersection, footprint: f64) -> Vec<f64> {
        let streams = x.mode().streams();
        let mut out = Vec::with_capacity(encoded_len(streams.len()));
        for (k, &j) in streams.iter().enumerate() {
            let (l, w) = self.stats[k];
            let cap = queue_capacity(x.lanes(j), x.radius(), footprint);
            out.push(if cap > 0.0 { l / cap } else { 0.0 });
            out.push(w / W_MAX);
        }
        for m in &self.occupancy {
            out.extend(m.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
        out.push(self.d / x.radius());
        out
    }
}

/// Canonical index of `j` within the mode's stream list.
pub fn direction_index(x: &Intersection, j: StreamId) -> Option<usize> {
    x.mode().streams().iter().position(|&s| s == j)
}
