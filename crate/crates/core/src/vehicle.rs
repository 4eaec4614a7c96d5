use serde::{Deserialize, Serialize};

use crate::stream::StreamId;

pub type VehicleId = u64;

/// Speed below which a vehicle counts as still.
pub const STILL_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleKind {
    Rv,
    Hv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    Upstream,
    ControlZone,
    Inside,
    Exited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Stop,
    Go,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Stop => 0,
            Action::Go => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Stop
        } else {
            Action::Go
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub kind: VehicleKind,
    /// An RV whose automation dropped out; it drives like an HV.
    pub offline: bool,
    pub stream: StreamId,
    pub lane: u32,
    pub exit_lane: u32,
    /// Front position along the route; 0 is the entrance line.
    pub s: f64,
    pub v: f64,
    pub a: f64,
    pub zone: Zone,
    /// Accumulated still time inside the control zone.
    pub wait_accum: f64,
    /// Length of the current still interval inside the control zone.
    pub wait_run: f64,
    /// Longest single still interval inside the control zone.
    pub wait_max: f64,
    pub current_action: Option<Action>,
    pub spawn_time: f64,
    pub entry_granted: bool,
}

impl Vehicle {
    /// Distance from the front bumper to the entrance line (0 once inside).
    pub fn distance_to_entrance(&self) -> f64 {
        (-self.s).max(0.0)
    }

    pub fn is_controlled_rv(&self) -> bool {
        self.kind == VehicleKind::Rv && !self.offline
    }

    pub fn is_still(&self) -> bool {
        self.v < STILL_SPEED
    }

    pub fn entered(&self) -> bool {
        self.s > 0.0
    }

    /// Inside the box, or granted entry and about to cross the line.
    pub fn holds_intersection(&self) -> bool {
        self.zone == Zone::Inside || (self.entry_granted && self.zone != Zone::Exited)
    }
}
