//! Append-only per-step run log, persisted as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::control::ControllerKind;
use crate::error::Result;
use crate::stream::StreamId;
use crate::vehicle::{Action, Vehicle, VehicleId, VehicleKind, Zone};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub offline: bool,
    pub stream: StreamId,
    pub lane: u32,
    pub s: f64,
    pub v: f64,
    pub zone: Zone,
    pub wait_accum: f64,
    pub wait_max: f64,
    pub entry_granted: bool,
}

impl From<&Vehicle> for VehicleRecord {
    fn from(v: &Vehicle) -> Self {
        VehicleRecord {
            id: v.id,
            kind: v.kind,
            offline: v.offline,
            stream: v.stream,
            lane: v.lane,
            s: v.s,
            v: v.v,
            zone: v.zone,
            wait_accum: v.wait_accum,
            wait_max: v.wait_max,
            entry_granted: v.entry_granted,
        }
    }
}

impl VehicleRecord {
    pub fn holds_intersection(&self) -> bool {
        self.zone == Zone::Inside || (self.entry_granted && self.zone != Zone::Exited)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub id: VehicleId,
    pub stream: StreamId,
    pub action: Action,
    /// Front of its lane and close enough to enter this step.
    pub candidate: bool,
    pub conflict: bool,
    pub granted: bool,
    pub explored: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Simulation step after the update; vehicle states are as of its end.
    pub step: u64,
    pub controller: ControllerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    pub vehicles: Vec<VehicleRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub grants: Vec<VehicleId>,
    pub entered: Vec<(VehicleId, StreamId)>,
    pub exited: Vec<(VehicleId, StreamId)>,
    pub conflicts: Vec<(VehicleId, VehicleId)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    /// State before the first step.
    pub initial: Vec<VehicleRecord>,
    pub steps: Vec<StepRecord>,
}

impl RunLog {
    pub fn push(&mut self, r: StepRecord) {
        debug_assert!(self.steps.last().is_none_or(|l| l.step < r.step));
        self.steps.push(r);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Vehicle states at the start of step record `k`.
    pub fn before(&self, k: usize) -> &[VehicleRecord] {
        if k == 0 {
            &self.initial
        } else {
            &self.steps[k - 1].vehicles
        }
    }

    /// One JSON object per line: the initial snapshot, then each step.
    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        serde_json::to_writer(&mut *w, &self.initial)?;
        w.write_all(b"\n")?;
        for s in &self.steps {
            serde_json::to_writer(&mut *w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut log = RunLog::default();
        if let Some(first) = lines.next() {
            log.initial = serde_json::from_str(&first?)?;
        }
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            log.steps.push(serde_json::from_str(&line)?);
        }
        Ok(log)
    }
}
