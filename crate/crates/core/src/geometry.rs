//! Parametric box geometry for a single intersection.
//!
//! Incoming lanes sit to the right of the road centerline (left-turn lanes
//! innermost, then through, then right-turn lanes). The box is a square whose
//! half side is the widest lane group on any arm. Through movements are
//! straight chords between their entry and exit lanes, turns are cubic
//! Bézier approximations of quarter arcs. Stop lines are set back from the
//! box edge by a short apron on both sides.

use crate::stream::{Approach, Movement, StreamId, CANONICAL};

pub const LANE_WIDTH: f64 = 3.5;
pub const SETBACK: f64 = 2.0;
const BEZIER_KAPPA: f64 = 0.552_284_749_8;
const CURVE_SEGMENTS: usize = 64;

pub type Point = (f64, f64);

#[derive(Debug, Clone)]
pub struct Polyline {
    pub points: Vec<Point>,
    /// Cumulative arc length at each point.
    pub arc: Vec<f64>,
}

impl Polyline {
    fn new(points: Vec<Point>) -> Self {
        let mut arc = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        arc.push(0.0);
        for w in points.windows(2) {
            acc += dist(w[0], w[1]);
            arc.push(acc);
        }
        Polyline { points, arc }
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap_or(&0.0)
    }
}

/// One lane-level path through the box, from stop line to the end of the
/// exit apron.
#[derive(Debug, Clone)]
pub struct LanePath {
    pub stream: StreamId,
    pub lane: u32,
    pub exit_lane: u32,
    pub line: Polyline,
}

pub fn dist(a: Point, b: Point) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn add(a: Point, b: Point) -> Point {
    (a.0 + b.0, a.1 + b.1)
}

fn scale(a: Point, k: f64) -> Point {
    (a.0 * k, a.1 * k)
}

fn right_normal(h: Point) -> Point {
    (h.1, -h.0)
}

/// Lane counts grouped per arm, derived from per-stream lane counts.
#[derive(Debug, Clone)]
pub struct LaneLayout {
    pub lanes: [u32; 12],
    pub half_side: f64,
}

impl LaneLayout {
    pub fn new(lanes: [u32; 12]) -> Self {
        let mut widest = 1u32;
        for a in Approach::ALL {
            widest = widest.max(incoming_lanes(&lanes, a));
            widest = widest.max(outgoing_lanes(&lanes, a));
        }
        // Controlled right turns get one lane of extra room for the curb
        // radius.
        let rights = Approach::ALL.iter().any(|&a| lanes[StreamId::new(a, Movement::R).index()] > 0);
        LaneLayout {
            lanes,
            half_side: (widest + rights as u32) as f64 * LANE_WIDTH,
        }
    }

    fn count(&self, s: StreamId) -> u32 {
        self.lanes[s.index()]
    }

    /// Index of lane `lane` of stream `s` counted outwards from the median.
    fn incoming_index(&self, s: StreamId, lane: u32) -> u32 {
        let l = self.count(StreamId::new(s.approach, Movement::L));
        let c = self.count(StreamId::new(s.approach, Movement::C));
        match s.movement {
            Movement::L => lane,
            Movement::C => l + lane,
            Movement::R => l + c + lane,
        }
    }

    pub fn exit_lane(&self, s: StreamId, lane: u32) -> u32 {
        lane.min(outgoing_lanes(&self.lanes, s.exit_heading()).saturating_sub(1))
    }

    /// Stop-line point of lane `lane` of stream `s`.
    pub fn stop_line(&self, s: StreamId, lane: u32) -> Point {
        let u = s.approach.heading();
        let r = right_normal(u);
        let offset = (self.incoming_index(s, lane) as f64 + 0.5) * LANE_WIDTH;
        add(scale(u, -(self.half_side + SETBACK)), scale(r, offset))
    }

    pub fn lane_path(&self, s: StreamId, lane: u32) -> LanePath {
        let h = self.half_side;
        let u = s.approach.heading();
        let r = right_normal(u);
        let o_in = (self.incoming_index(s, lane) as f64 + 0.5) * LANE_WIDTH;
        let p0 = self.stop_line(s, lane);
        let p1 = add(scale(u, -h), scale(r, o_in));

        let exit_lane = self.exit_lane(s, lane);
        let u2 = s.exit_heading().heading();
        let r2 = right_normal(u2);
        let o_out = (exit_lane as f64 + 0.5) * LANE_WIDTH;
        let p2 = add(scale(u2, h), scale(r2, o_out));
        let p3 = add(scale(u2, h + SETBACK), scale(r2, o_out));

        let mut pts = vec![p0, p1];
        match s.movement {
            Movement::C => pts.push(p2),
            Movement::L | Movement::R => {
                let corner = line_intersection(p1, u, p2, u2);
                let c1 = add(p1, scale((corner.0 - p1.0, corner.1 - p1.1), BEZIER_KAPPA));
                let c2 = add(p2, scale((corner.0 - p2.0, corner.1 - p2.1), BEZIER_KAPPA));
                for i in 1..=CURVE_SEGMENTS {
                    let t = i as f64 / CURVE_SEGMENTS as f64;
                    pts.push(bezier(p1, c1, c2, p2, t));
                }
            }
        }
        pts.push(p3);
        LanePath {
            stream: s,
            lane,
            exit_lane,
            line: Polyline::new(pts),
        }
    }
}

pub fn incoming_lanes(lanes: &[u32; 12], a: Approach) -> u32 {
    CANONICAL
        .iter()
        .filter(|s| s.approach == a)
        .map(|s| lanes[s.index()])
        .sum()
}

/// Outgoing lanes on the arm that carries traffic leaving with heading `d`.
pub fn outgoing_lanes(lanes: &[u32; 12], d: Approach) -> u32 {
    CANONICAL
        .iter()
        .filter(|s| s.exit_heading() == d)
        .map(|s| lanes[s.index()])
        .max()
        .unwrap_or(0)
}

fn bezier(p0: Point, p1: Point, p2: Point, p3: Point, t: f64) -> Point {
    let m = 1.0 - t;
    let a = m * m * m;
    let b = 3.0 * m * m * t;
    let c = 3.0 * m * t * t;
    let d = t * t * t;
    (
        a * p0.0 + b * p1.0 + c * p2.0 + d * p3.0,
        a * p0.1 + b * p1.1 + c * p2.1 + d * p3.1,
    )
}

/// Intersection of the line through `p` along `u` and the line through `q`
/// along `v`; the lines are perpendicular for every turn so this never
/// degenerates.
fn line_intersection(p: Point, u: Point, q: Point, v: Point) -> Point {
    let det = u.0 * (-v.1) - u.1 * (-v.0);
    let dx = q.0 - p.0;
    let dy = q.1 - p.1;
    let t = (dx * (-v.1) - dy * (-v.0)) / det;
    add(p, scale(u, t))
}

/// Arc-length positions `(s_a, s_b)` of every proper crossing between two
/// polylines. Points closer than `dedup` along `a` collapse to one.
pub fn crossings(a: &Polyline, b: &Polyline, dedup: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..a.points.len() - 1 {
        let (p, p2) = (a.points[i], a.points[i + 1]);
        for j in 0..b.points.len() - 1 {
            let (q, q2) = (b.points[j], b.points[j + 1]);
            if let Some((t, u)) = segment_intersection(p, p2, q, q2) {
                let sa = a.arc[i] + t * (a.arc[i + 1] - a.arc[i]);
                let sb = b.arc[j] + u * (b.arc[j + 1] - b.arc[j]);
                if !out.iter().any(|&(x, _)| (x - sa).abs() < dedup) {
                    out.push((sa, sb));
                }
            }
        }
    }
    out
}

fn segment_intersection(p: Point, p2: Point, q: Point, q2: Point) -> Option<(f64, f64)> {
    let r = (p2.0 - p.0, p2.1 - p.1);
    let s = (q2.0 - q.0, q2.1 - q.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-12 {
        return None;
    }
    let qp = (q.0 - p.0, q.1 - p.1);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    const EPS: f64 = 1e-9;
    if (-EPS..=1.0 + EPS).contains(&t) && (-EPS..=1.0 + EPS).contains(&u) {
        Some((t.clamp(0.0, 1.0), u.clamp(0.0, 1.0)))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_lane_eight() -> LaneLayout {
        let mut lanes = [0u32; 12];
        for l in lanes.iter_mut().take(8) {
            *l = 1;
        }
        LaneLayout::new(lanes)
    }

    #[test]
    fn canonical_half_side_is_two_lanes() {
        assert!((one_lane_eight().half_side - 7.0).abs() < 1e-12);
    }

    #[test]
    fn left_turn_is_close_to_quarter_circle() {
        let layout = one_lane_eight();
        let p = layout.lane_path("E-L".parse().unwrap(), 0);
        let expected = std::f64::consts::FRAC_PI_2 * (7.0 + 1.75) + 2.0 * SETBACK;
        assert!((p.line.length() - expected).abs() < 0.05, "{}", p.line.length());
    }

    #[test]
    fn opposing_throughs_do_not_cross() {
        let layout = one_lane_eight();
        let ec = layout.lane_path("E-C".parse().unwrap(), 0);
        let wc = layout.lane_path("W-C".parse().unwrap(), 0);
        assert!(crossings(&ec.line, &wc.line, 0.5).is_empty());
        let nc = layout.lane_path("N-C".parse().unwrap(), 0);
        let x = crossings(&ec.line, &nc.line, 0.5);
        assert_eq!(x.len(), 1);
    }
}
