//! Longitudinal driver models: IDM car-following and a discrete safe-speed
//! cap in the style of the Krauss collision-avoidance model.

use serde::{Deserialize, Serialize};

/// Simulation time step, seconds. Physics and decisions share it.
pub const DT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired speed, m/s.
    pub v0: f64,
    /// Time headway, s.
    pub time_headway: f64,
    pub delta: f64,
    /// Standstill gap, m.
    pub s0: f64,
    pub a_max: f64,
    /// Comfortable deceleration (positive), m/s².
    pub b: f64,
    pub b_emergency: f64,
    pub vehicle_length: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 13.89,
            time_headway: 1.0,
            delta: 4.0,
            s0: 1.0,
            a_max: 2.6,
            b: 4.5,
            b_emergency: 9.0,
            vehicle_length: 4.0,
        }
    }
}

impl IdmParams {
    /// Queue footprint of one stopped vehicle.
    pub fn footprint(&self) -> f64 {
        self.vehicle_length + self.s0
    }
}

/// Desired dynamic gap `s*`.
pub fn desired_gap(v: f64, leader_v: f64, p: &IdmParams) -> f64 {
    let dv = v - leader_v;
    p.s0 + (v * p.time_headway + v * dv / (2.0 * (p.a_max * p.b).sqrt())).max(0.0)
}

/// IDM acceleration. `gap` is bumper-to-bumper distance to the leader, or
/// `f64::INFINITY` on a free road. Overlapping vehicles (`gap <= 0`) get the
/// emergency deceleration.
pub fn idm_accel(v: f64, gap: f64, leader_v: f64, p: &IdmParams) -> f64 {
    if gap <= 0.0 {
        return -p.b_emergency;
    }
    let free = 1.0 - (v / p.v0).powf(p.delta);
    let interaction = if gap.is_finite() {
        (desired_gap(v, leader_v, p) / gap).powi(2)
    } else {
        0.0
    };
    (p.a_max * (free - interaction)).clamp(-p.b_emergency, p.a_max)
}

/// Distance covered while braking from `u` at `b_emergency` under the
/// semi-implicit update, excluding the current step.
pub fn braking_distance(u: f64, p: &IdmParams) -> f64 {
    let db = p.b_emergency * DT;
    let mut d = 0.0;
    let mut w = u - db;
    while w > 0.0 {
        d += w * DT;
        w -= db;
    }
    d
}

/// Largest next-step speed `v'` such that travelling `v'·dt` now and then
/// braking at `b_emergency` never reaches the leader's rear, assuming the
/// leader brakes at `b_emergency` from this step on.
pub fn safe_speed(gap: f64, leader_v: f64, p: &IdmParams) -> f64 {
    if !gap.is_finite() {
        return f64::INFINITY;
    }
    let room = gap + braking_distance(leader_v, p);
    if room <= 0.0 {
        return 0.0;
    }
    // g(u) = dt·[(n+1)u − B·n(n+1)/2] on u ∈ [nB, (n+1)B), B = b·dt.
    let big_b = p.b_emergency * DT;
    let r = room / DT;
    let mut n = 0.0_f64;
    while big_b * (n + 1.0) * (n + 2.0) / 2.0 <= r {
        n += 1.0;
    }
    (r + big_b * n * (n + 1.0) / 2.0) / (n + 1.0)
}

/// Caps a proposed acceleration by the safe-speed constraint; never returns
/// below `-b_emergency`.
pub fn safe_speed_cap(proposed_a: f64, v: f64, gap: f64, leader_v: f64, p: &IdmParams) -> f64 {
    if !gap.is_finite() {
        return proposed_a.max(-p.b_emergency);
    }
    let a_safe = if gap <= 0.0 {
        -p.b_emergency
    } else {
        (safe_speed(gap, leader_v, p) - v) / DT
    };
    proposed_a.min(a_safe).max(-p.b_emergency)
}
