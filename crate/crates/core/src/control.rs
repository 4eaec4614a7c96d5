//! Stop/Go actuation, the conflict-resolution gate, the fixed-time signal
//! and NoTL baselines, and robustness events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idm::{idm_accel, IdmParams};
use crate::intersection::Intersection;
use crate::perception::W_MAX;
use crate::stream::StreamId;
use crate::vehicle::{Action, Vehicle, VehicleId};
use crate::world::World;

/// A vehicle at the entrance holds once this close and this slow.
pub const HOLD_DISTANCE: f64 = 0.5;
pub const HOLD_SPEED: f64 = 0.1;

/// Commanded acceleration for a Stop/Go decision. `leader` is
/// `(gap, leader speed)` of the vehicle ahead in the lane, if any.
pub fn actuation(action: Action, v: &Vehicle, leader: Option<(f64, f64)>, p: &IdmParams) -> f64 {
    match action {
        Action::Go => {
            let (gap, lv) = leader.unwrap_or((f64::INFINITY, 0.0));
            idm_accel(v.v, gap, lv, p).min(p.a_max)
        }
        Action::Stop => {
            let d_line = v.distance_to_entrance();
            if d_line < HOLD_DISTANCE && v.v < HOLD_SPEED {
                return 0.0;
            }
            let d_front = match leader {
                Some((gap, _)) => d_line.min(gap - p.s0),
                None => d_line,
            };
            stop_accel(v.v, d_front, p)
        }
    }
}

/// `−v²/(2·d_front)`, clamped to the emergency deceleration.
pub fn stop_accel(v: f64, d_front: f64, p: &IdmParams) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if d_front <= 0.0 {
        return -p.b_emergency;
    }
    (-v * v / (2.0 * d_front)).max(-p.b_emergency)
}

/// Mean of normalised waiting time and normalised queue length.
pub fn priority_score(l: f64, w: f64, lanes: u32) -> f64 {
    let l_cap = 6.0 * lanes.max(1) as f64;
    0.5 * (w.clamp(0.0, W_MAX) / W_MAX + l.clamp(0.0, l_cap) / l_cap)
}

/// A front RV that chose Go this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: VehicleId,
    pub stream: StreamId,
    pub score: f64,
}

/// Grants entry to candidates: anyone facing a conflicting stream that holds
/// the intersection is blocked; the rest are granted greedily by descending
/// score (ties by canonical stream order, then id), each grant blocking later
/// candidates on conflicting streams.
pub fn resolve_conflicts(candidates: &[Candidate], holds: impl Fn(StreamId) -> bool, x: &Intersection) -> Vec<VehicleId> {
    let mut open: Vec<Candidate> = candidates
        .iter()
        .copied()
        .filter(|c| !x.conflicting_with(c.stream).any(&holds))
        .collect();
    open.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.stream.index().cmp(&b.stream.index()))
            .then(a.id.cmp(&b.id))
    });
    let mut granted: Vec<Candidate> = Vec::new();
    for c in open {
        if granted.iter().all(|g| !x.conflicts(g.stream, c.stream)) {
            granted.push(c);
        }
    }
    granted.into_iter().map(|c| c.id).collect()
}

/// Entry rule for vehicles not under the learned policy: enter iff no
/// conflicting vehicle occupies the first conflict zone on the path.
pub fn notl_entry_rule(v: &Vehicle, world: &World) -> bool {
    let x = &world.intersection;
    let Some((_, first)) = x.first_zone(v.stream) else {
        return true;
    };
    for b in x.conflicting_with(v.stream) {
        let Some(z) = x.zone(v.stream, b) else {
            continue;
        };
        if z.0 < first.1 && world.zone_occupied(v.stream, b, Some(v.id)) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub green: Vec<StreamId>,
    pub green_s: f64,
    pub yellow_s: f64,
    pub all_red_s: f64,
}

impl Phase {
    pub fn duration(&self) -> f64 {
        self.green_s + self.yellow_s + self.all_red_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<Phase>,
}

impl Default for PhasePlan {
    fn default() -> Self {
        let p = |a: &str, b: &str| Phase {
            green: vec![a.parse().expect("stream"), b.parse().expect("stream")],
            green_s: 30.0,
            yellow_s: 3.0,
            all_red_s: 2.0,
        };
        PhasePlan {
            phases: vec![p("N-C", "S-C"), p("N-L", "S-L"), p("E-C", "W-C"), p("E-L", "W-L")],
        }
    }
}

impl PhasePlan {
    pub fn cycle(&self) -> f64 {
        self.phases.iter().map(Phase::duration).sum()
    }

    /// Rejects empty plans, non-positive greens and green sets containing a
    /// conflicting pair. Inactive streams are allowed and simply never enter.
    pub fn validate(&self, x: &Intersection) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::InvalidArgument("phase plan has no phases".into()));
        }
        for (k, ph) in self.phases.iter().enumerate() {
            if !(ph.green_s > 0.0 && ph.yellow_s >= 0.0 && ph.all_red_s >= 0.0) {
                return Err(Error::InvalidArgument(format!("phase {k}: invalid durations")));
            }
            for (i, &a) in ph.green.iter().enumerate() {
                for &b in &ph.green[i + 1..] {
                    if x.conflicts(a, b) {
                        return Err(Error::InvalidArgument(format!("phase {k}: {a} and {b} conflict")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Green streams at time `t`; empty during yellow and all-red.
    pub fn green_at(&self, t: f64) -> &[StreamId] {
        let mut r = t.rem_euclid(self.cycle());
        for ph in &self.phases {
            if r < ph.green_s {
                return &ph.green;
            }
            r -= ph.green_s;
            if r < ph.yellow_s + ph.all_red_s {
                return &[];
            }
            r -= ph.yellow_s + ph.all_red_s;
        }
        &[]
    }
}

/// Which controller gates entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControllerKind {
    Tl,
    NoTl,
    Policy,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControllerKind::Tl => "tl",
            ControllerKind::NoTl => "notl",
            ControllerKind::Policy => "policy",
        })
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tl" => Ok(ControllerKind::Tl),
            "notl" => Ok(ControllerKind::NoTl),
            "policy" => Ok(ControllerKind::Policy),
            _ => Err(Error::Parse(format!("unknown controller `{s}` (tl | notl | policy)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// Signals switch off; the successor controller takes over.
    Blackout { successor: ControllerKind },
    /// Part of the RV fleet drops to IDM driving.
    RvDrop { target_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub at_step: u64,
}

/// Probability that an online RV goes offline when the rate drops from
/// `from` to `to`.
pub fn drop_probability(from: f64, to: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&to) {
        return Err(Error::InvalidArgument(format!("target RV rate {to} outside [0, 1]")));
    }
    if to > from {
        return Err(Error::InvalidArgument(format!("target RV rate {to} exceeds current rate {from}")));
    }
    if from <= 0.0 {
        return Ok(0.0);
    }
    Ok((from - to) / from)
}
