//! Intersection topology, conflict zones and the derived conflict table.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{crossings, LaneLayout, Point};
use crate::stream::{Approach, Mode, Movement, StreamId, CANONICAL};

/// Half the vehicle length: conflict zones extend this far either side of a
/// path crossing.
pub const ZONE_HALF_WIDTH: f64 = 2.0;
pub const MIN_INNER_PATH: f64 = 10.0;
pub const DEFAULT_CONTROL_ZONE_RADIUS: f64 = 30.0;
pub const DEFAULT_APPROACH_LENGTH: f64 = 150.0;
pub const DEFAULT_EXIT_LENGTH: f64 = 60.0;

/// A conflict zone seen from the ordered pair `(a, b)`: `on_a` is the
/// interval on `a`'s inner path, `on_b` the interval on `b`'s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictZone {
    pub a: StreamId,
    pub b: StreamId,
    pub on_a: (f64, f64),
    pub on_b: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionSpec {
    pub approaches: Vec<Approach>,
    pub mode: Mode,
    /// Lanes per stream, indexed canonically.
    pub lanes: [u32; 12],
    pub approach_length: f64,
    pub control_zone_radius: f64,
    pub exit_length: f64,
    /// Inner path length per stream (0 for inactive streams).
    pub inner_path_length: [f64; 12],
    pub conflict_zones: Vec<ConflictZone>,
    /// Stop-line position of lane 0 of each stream, metres from the centre.
    pub stop_lines: [Point; 12],
}

impl IntersectionSpec {
    /// Derive paths and conflict zones from lane counts using the box layout.
    /// Streams whose approach or exit arm is missing get zero lanes.
    pub fn from_layout(approaches: &[Approach], lanes: [u32; 12], mode: Mode) -> Self {
        let mut lanes = lanes;
        for s in CANONICAL {
            let exit_arm_present = approaches.contains(&s.exit_heading().opposite());
            let allowed = approaches.contains(&s.approach)
                && exit_arm_present
                && (mode == Mode::TwelveDirection || s.movement != Movement::R);
            if !allowed {
                lanes[s.index()] = 0;
            }
        }
        let layout = LaneLayout::new(lanes);

        let mut inner_path_length = [0.0; 12];
        let mut stop_lines = [(0.0, 0.0); 12];
        let mut paths = Vec::new();
        for s in CANONICAL {
            let n = lanes[s.index()];
            if n == 0 {
                continue;
            }
            let lane0 = layout.lane_path(s, 0);
            inner_path_length[s.index()] = lane0.line.length();
            stop_lines[s.index()] = layout.stop_line(s, 0);
            for lane in 0..n {
                paths.push(layout.lane_path(s, lane));
            }
        }

        let mut hull: Vec<Option<((f64, f64), (f64, f64))>> = vec![None; 144];
        for (i, pa) in paths.iter().enumerate() {
            for pb in paths.iter().skip(i + 1) {
                if pa.stream == pb.stream {
                    continue;
                }
                let la = inner_path_length[pa.stream.index()];
                let lb = inner_path_length[pb.stream.index()];
                for (sa, sb) in crossings(&pa.line, &pb.line, 0.5) {
                    let za = zone_around(sa, la);
                    let zb = zone_around(sb, lb);
                    let key = pa.stream.index() * 12 + pb.stream.index();
                    hull[key] = Some(match hull[key] {
                        None => (za, zb),
                        Some((ha, hb)) => (merge(ha, za), merge(hb, zb)),
                    });
                }
            }
        }
        let mut conflict_zones = Vec::new();
        for a in CANONICAL {
            for b in CANONICAL {
                if let Some((za, zb)) = hull[a.index() * 12 + b.index()] {
                    conflict_zones.push(ConflictZone { a, b, on_a: za, on_b: zb });
                    conflict_zones.push(ConflictZone { a: b, b: a, on_a: zb, on_b: za });
                }
            }
        }
        conflict_zones.sort_by_key(|z| (z.a.index(), z.b.index()));

        let mut sorted = approaches.to_vec();
        sorted.sort();
        sorted.dedup();
        IntersectionSpec {
            approaches: sorted,
            mode,
            lanes,
            approach_length: DEFAULT_APPROACH_LENGTH,
            control_zone_radius: DEFAULT_CONTROL_ZONE_RADIUS,
            exit_length: DEFAULT_EXIT_LENGTH,
            inner_path_length,
            conflict_zones,
            stop_lines,
        }
    }

    pub fn uniform_lanes(mode: Mode, per_movement: u32) -> [u32; 12] {
        let mut lanes = [0u32; 12];
        for s in mode.streams() {
            lanes[s.index()] = per_movement;
        }
        lanes
    }

    /// Four-way, 8-direction, one lane per controlled movement.
    pub fn canonical() -> Self {
        Self::from_layout(
            &Approach::ALL,
            Self::uniform_lanes(Mode::EightDirection, 1),
            Mode::EightDirection,
        )
    }
}

fn zone_around(s: f64, len: f64) -> (f64, f64) {
    ((s - ZONE_HALF_WIDTH).max(0.0), (s + ZONE_HALF_WIDTH).min(len))
}

fn merge(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0.min(b.0), a.1.max(b.1))
}

/// Unordered stream pair with the canonically smaller stream first.
pub fn unordered(a: StreamId, b: StreamId) -> (StreamId, StreamId) {
    if a.index() <= b.index() {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictTable {
    pub conflict_free: BTreeSet<(StreamId, StreamId)>,
    pub conflicting: BTreeSet<(StreamId, StreamId)>,
}

#[derive(Debug, Clone)]
pub struct Intersection {
    spec: IntersectionSpec,
    active: Vec<StreamId>,
    zones: Vec<Option<(f64, f64)>>,
    table: ConflictTable,
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidIntersection {
        field: field.to_string(),
        reason: reason.into(),
    }
}

pub fn build_intersection(spec: IntersectionSpec) -> Result<Intersection> {
    if !(3..=4).contains(&spec.approaches.len()) {
        return Err(invalid("approaches", format!("{} approaches, expected 3 or 4", spec.approaches.len())));
    }
    if spec.lanes.iter().all(|&n| n == 0) {
        return Err(invalid("lanes_per_movement", "no stream has any lane"));
    }
    for s in CANONICAL {
        if spec.lanes[s.index()] == 0 {
            continue;
        }
        if !spec.approaches.contains(&s.approach) {
            return Err(invalid("lanes_per_movement", format!("{s} has lanes but its approach is absent")));
        }
        if spec.mode == Mode::EightDirection && s.movement == Movement::R {
            return Err(invalid("lanes_per_movement", format!("{s} is not controlled in 8-direction mode")));
        }
    }
    for (field, v) in [
        ("approach_length", spec.approach_length),
        ("control_zone_radius", spec.control_zone_radius),
        ("exit_length", spec.exit_length),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(field, format!("must be positive, got {v}")));
        }
    }
    if spec.control_zone_radius > spec.approach_length {
        return Err(invalid("control_zone_radius", "exceeds approach_length"));
    }
    let active: Vec<StreamId> = spec
        .mode
        .streams()
        .iter()
        .copied()
        .filter(|s| spec.lanes[s.index()] > 0)
        .collect();
    for &s in &active {
        let len = spec.inner_path_length[s.index()];
        if !(len >= MIN_INNER_PATH && len.is_finite()) {
            return Err(invalid(
                "inner_path_length",
                format!("{s}: {len} m is below the {MIN_INNER_PATH} m minimum"),
            ));
        }
    }

    let mut zones = vec![None; 144];
    for z in &spec.conflict_zones {
        if !active.contains(&z.a) || !active.contains(&z.b) || z.a == z.b {
            return Err(invalid("conflict_zone_geometry", format!("zone ({}, {}) references an inactive stream", z.a, z.b)));
        }
        for (s, iv) in [(z.a, z.on_a), (z.b, z.on_b)] {
            let len = spec.inner_path_length[s.index()];
            if !(iv.0 >= 0.0 && iv.0 < iv.1 && iv.1 <= len + 1e-9) {
                return Err(invalid("conflict_zone_geometry", format!("zone interval {iv:?} outside {s}'s path")));
            }
        }
        zones[z.a.index() * 12 + z.b.index()] = Some(z.on_a);
    }
    for z in &spec.conflict_zones {
        let mirrored = spec
            .conflict_zones
            .iter()
            .any(|m| m.a == z.b && m.b == z.a && m.on_a == z.on_b && m.on_b == z.on_a);
        if !mirrored {
            return Err(invalid("conflict_zone_geometry", format!("zone ({}, {}) has no mirrored entry", z.a, z.b)));
        }
    }

    let mut conflict_free = BTreeSet::new();
    let mut conflicting = BTreeSet::new();
    for (i, &a) in active.iter().enumerate() {
        for &b in &active[i + 1..] {
            if zones[a.index() * 12 + b.index()].is_some() {
                conflicting.insert(unordered(a, b));
            } else {
                conflict_free.insert(unordered(a, b));
            }
        }
    }

    Ok(Intersection {
        spec,
        active,
        zones,
        table: ConflictTable { conflict_free, conflicting },
    })
}

impl Intersection {
    pub fn spec(&self) -> &IntersectionSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.spec.mode
    }

    pub fn active_streams(&self) -> &[StreamId] {
        &self.active
    }

    pub fn is_active(&self, s: StreamId) -> bool {
        self.spec.lanes[s.index()] > 0 && self.spec.mode.streams().contains(&s)
    }

    pub fn lanes(&self, s: StreamId) -> u32 {
        self.spec.lanes[s.index()]
    }

    pub fn table(&self) -> &ConflictTable {
        &self.table
    }

    pub fn radius(&self) -> f64 {
        self.spec.control_zone_radius
    }

    pub fn path_length(&self, s: StreamId) -> f64 {
        self.spec.inner_path_length[s.index()]
    }

    pub fn conflicts(&self, a: StreamId, b: StreamId) -> bool {
        self.zones[a.index() * 12 + b.index()].is_some()
    }

    /// Zone interval on `a`'s path for the pair `(a, b)`.
    pub fn zone(&self, a: StreamId, b: StreamId) -> Option<(f64, f64)> {
        self.zones[a.index() * 12 + b.index()]
    }

    /// Streams that conflict with `s`, canonical order.
    pub fn conflicting_with(&self, s: StreamId) -> impl Iterator<Item = StreamId> + '_ {
        self.active.iter().copied().filter(move |&b| self.conflicts(s, b))
    }

    /// Earliest conflict zone on `s`'s path as `(interval, other stream)`;
    /// zones sharing a start are reported for the canonically first stream.
    pub fn first_zone(&self, s: StreamId) -> Option<(StreamId, (f64, f64))> {
        self.conflicting_with(s)
            .filter_map(|b| self.zone(s, b).map(|z| (b, z)))
            .min_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
    }

    /// All zone start points on `s`'s path that begin at the same position
    /// as the first one (several conflicting streams may share it).
    pub fn first_zone_streams(&self, s: StreamId) -> Vec<(StreamId, (f64, f64))> {
        let Some((_, first)) = self.first_zone(s) else {
            return Vec::new();
        };
        self.conflicting_with(s)
            .filter_map(|b| self.zone(s, b).map(|z| (b, z)))
            .filter(|(_, z)| (z.0 - first.0).abs() < 1e-9)
            .collect()
    }

    pub fn stop_line(&self, s: StreamId) -> Point {
        self.spec.stop_lines[s.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &str, b: &str) -> (StreamId, StreamId) {
        unordered(a.parse().unwrap(), b.parse().unwrap())
    }

    #[test]
    fn canonical_conflict_free_set() {
        let x = build_intersection(IntersectionSpec::canonical()).unwrap();
        let expected: BTreeSet<_> = [
            ("S-C", "N-C"),
            ("W-C", "E-C"),
            ("S-L", "N-L"),
            ("E-L", "W-L"),
            ("S-C", "S-L"),
            ("E-C", "E-L"),
            ("N-C", "N-L"),
            ("W-C", "W-L"),
        ]
        .iter()
        .map(|(a, b)| pair(a, b))
        .collect();
        assert_eq!(x.table().conflict_free, expected);
        assert_eq!(x.table().conflicting.len(), 20);
    }

    #[test]
    fn three_way_restricts_streams() {
        let approaches = [Approach::W, Approach::N, Approach::S];
        let spec = IntersectionSpec::from_layout(
            &approaches,
            IntersectionSpec::uniform_lanes(Mode::EightDirection, 1),
            Mode::EightDirection,
        );
        let x = build_intersection(spec).unwrap();
        let names: Vec<String> = x.active_streams().iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["W-L", "N-C", "S-L", "S-C"]);
        for z in &x.spec().conflict_zones {
            assert!(x.active_streams().contains(&z.a) && x.active_streams().contains(&z.b));
        }
        let absent: StreamId = "E-C".parse().unwrap();
        assert!(x.conflicting_with(absent).all(|_| false) || !x.is_active(absent));
        assert!(x.zone(absent, "N-C".parse().unwrap()).is_none());
    }

    #[test]
    fn zero_inner_path_is_rejected() {
        let mut spec = IntersectionSpec::canonical();
        spec.inner_path_length[0] = 0.0;
        match build_intersection(spec) {
            Err(Error::InvalidIntersection { field, .. }) => assert_eq!(field, "inner_path_length"),
            other => panic!("expected construction error, got {other:?}"),
        }
    }

    #[test]
    fn no_lanes_is_rejected() {
        let mut spec = IntersectionSpec::canonical();
        spec.lanes = [0; 12];
        assert!(matches!(
            build_intersection(spec),
            Err(Error::InvalidIntersection { field, .. }) if field == "lanes_per_movement"
        ));
    }

    #[test]
    fn asymmetric_zone_is_rejected() {
        let mut spec = IntersectionSpec::canonical();
        spec.conflict_zones[0].on_b.1 -= 0.5;
        assert!(build_intersection(spec).is_err());
    }

    #[test]
    fn twelve_direction_paths_are_long_enough() {
        let spec = IntersectionSpec::from_layout(
            &Approach::ALL,
            IntersectionSpec::uniform_lanes(Mode::TwelveDirection, 1),
            Mode::TwelveDirection,
        );
        let x = build_intersection(spec).unwrap();
        assert_eq!(x.active_streams().len(), 12);
        // Right turns merge with the through and left movements that share
        // their exit arm.
        assert!(x.conflicts("E-R".parse().unwrap(), "S-C".parse().unwrap()));
        assert!(x.conflicts("E-R".parse().unwrap(), "W-L".parse().unwrap()));
    }

    #[test]
    fn zones_are_symmetric_and_inside_paths() {
        let x = build_intersection(IntersectionSpec::canonical()).unwrap();
        for &a in x.active_streams() {
            for &b in x.active_streams() {
                assert_eq!(x.conflicts(a, b), x.conflicts(b, a));
                if let Some(z) = x.zone(a, b) {
                    assert!(z.0 >= 0.0 && z.1 <= x.path_length(a) + 1e-9);
                }
            }
        }
    }
}
