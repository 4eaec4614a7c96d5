//! V2V information sharing: link construction for the long-range one-hop and
//! short-range clustered protocols, per-hop packet loss, and aggregation of
//! shared ego estimates.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, Point};
use crate::perception::ego_estimates;
use crate::rng::SimRng;
use crate::stream::StreamId;
use crate::vehicle::{Vehicle, VehicleId, Zone};
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    LongRange,
    ShortRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommConfig {
    pub protocol: Protocol,
    pub long_range_radius: f64,
    pub hop_range: f64,
    pub max_hops: u32,
    pub per: f64,
}

impl Default for CommConfig {
    fn default() -> Self {
        CommConfig {
            protocol: Protocol::LongRange,
            long_range_radius: 150.0,
            hop_range: 50.0,
            max_hops: 3,
            per: 0.0,
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.per) {
            return Err(Error::InvalidArgument(format!("packet error rate {} outside [0, 1]", self.per)));
        }
        if !(self.long_range_radius > 0.0 && self.hop_range > 0.0 && self.max_hops > 0) {
            return Err(Error::InvalidArgument("communication ranges must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommMessage {
    pub sender: VehicleId,
    pub stream: StreamId,
    /// Sender's distance to the entrance, metres.
    pub pos: f64,
    pub ego_l: f64,
    pub ego_w: f64,
}

/// A communicating RV: controlled, inside the control zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: VehicleId,
    pub stream: StreamId,
    pub s: f64,
    pub xy: Point,
}

/// Planar position of a vehicle upstream of its entrance line.
pub fn position(world: &World, v: &Vehicle) -> Point {
    let line = world.intersection.stop_line(v.stream);
    let h = v.stream.approach.heading();
    let d = v.distance_to_entrance();
    (line.0 - h.0 * d, line.1 - h.1 * d)
}

pub fn nodes(world: &World) -> Vec<Node> {
    let mut out: Vec<Node> = world
        .vehicles
        .iter()
        .filter(|v| v.is_controlled_rv() && v.zone == Zone::ControlZone)
        .map(|v| Node {
            id: v.id,
            stream: v.stream,
            s: v.s,
            xy: position(world, v),
        })
        .collect();
    out.sort_by_key(|n| n.id);
    out
}

/// Messages broadcast this step: one per stopped RV in the control zone.
pub fn messages(world: &World) -> Vec<CommMessage> {
    let footprint = world.params.footprint();
    let mut out: Vec<CommMessage> = world
        .vehicles
        .iter()
        .filter_map(|v| {
            ego_estimates(v, footprint).map(|(l, w)| CommMessage {
                sender: v.id,
                stream: v.stream,
                pos: v.distance_to_entrance(),
                ego_l: l,
                ego_w: w,
            })
        })
        .collect();
    out.sort_by_key(|m| m.sender);
    out
}

/// Hop count per reachable ordered `(sender, receiver)` pair of distinct
/// nodes.
pub fn build_links(nodes: &[Node], cfg: &CommConfig) -> BTreeMap<(VehicleId, VehicleId), u32> {
    let mut links = BTreeMap::new();
    match cfg.protocol {
        Protocol::LongRange => {
            let near: Vec<&Node> = nodes.iter().filter(|n| dist(n.xy, (0.0, 0.0)) <= cfg.long_range_radius).collect();
            for a in &near {
                for b in &near {
                    if a.id != b.id {
                        links.insert((a.id, b.id), 1);
                    }
                }
            }
        }
        Protocol::ShortRange => {
            let mut masters: BTreeMap<StreamId, &Node> = BTreeMap::new();
            for n in nodes {
                match masters.get(&n.stream) {
                    Some(m) if m.s > n.s || (m.s == n.s && m.id < n.id) => {}
                    _ => {
                        masters.insert(n.stream, n);
                    }
                }
            }
            let ok = |a: Point, b: Point| dist(a, b) <= cfg.hop_range;
            for a in nodes {
                let ma = masters[&a.stream];
                for b in nodes {
                    if a.id == b.id {
                        continue;
                    }
                    let mb = masters[&b.stream];
                    let mut hops = 0;
                    let mut reachable = true;
                    if a.id != ma.id {
                        hops += 1;
                        reachable &= ok(a.xy, ma.xy);
                    }
                    if ma.id != mb.id {
                        hops += 1;
                        reachable &= ok(ma.xy, mb.xy);
                    }
                    if b.id != mb.id {
                        hops += 1;
                        reachable &= ok(mb.xy, b.xy);
                    }
                    if reachable && hops >= 1 && hops <= cfg.max_hops {
                        links.insert((a.id, b.id), hops);
                    }
                }
            }
        }
    }
    links
}

/// Probability a message crossing `hops` links arrives.
pub fn success_probability(per: f64, hops: u32) -> f64 {
    (1.0 - per).powi(hops as i32)
}

/// Messages each receiver got this step. Every receiver always knows its own
/// message; other deliveries succeed independently with probability
/// `(1 − per)^hops`. Draws happen in (sender, receiver) id order.
pub fn deliver(
    messages: &[CommMessage],
    receivers: &[VehicleId],
    links: &BTreeMap<(VehicleId, VehicleId), u32>,
    per: f64,
    rng: &mut SimRng,
) -> BTreeMap<VehicleId, Vec<CommMessage>> {
    let mut out: BTreeMap<VehicleId, Vec<CommMessage>> = receivers.iter().map(|&r| (r, Vec::new())).collect();
    for m in messages {
        for &r in receivers {
            if r == m.sender {
                out.get_mut(&r).expect("receiver").push(*m);
                continue;
            }
            let Some(&hops) = links.get(&(m.sender, r)) else {
                continue;
            };
            let u: f64 = rng.random();
            if u < success_probability(per, hops) {
                out.get_mut(&r).expect("receiver").push(*m);
            }
        }
    }
    out
}

/// `(l̂, ŵ)` per direction in `streams` order: the largest shared queue
/// extent and the mean shared waiting time.
pub fn aggregate_estimates(received: &[CommMessage], streams: &[StreamId]) -> Vec<(f64, f64)> {
    streams
        .iter()
        .map(|&j| {
            let mut l: f64 = 0.0;
            let mut w_sum = 0.0;
            let mut n = 0usize;
            for m in received.iter().filter(|m| m.stream == j) {
                l = l.max(m.ego_l);
                w_sum += m.ego_w;
                n += 1;
            }
            if n == 0 {
                (0.0, 0.0)
            } else {
                (l, w_sum / n as f64)
            }
        })
        .collect()
}

/// Percentage error of one estimate; `None` when the actual value is zero
/// but the estimate is not (excluded from averages).
pub fn estimation_error(actual: f64, estimated: f64) -> Option<f64> {
    if actual == 0.0 {
        return if estimated == 0.0 { Some(0.0) } else { None };
    }
    Some((actual - estimated).abs() / actual.abs() * 100.0)
}

/// Running mean of estimation errors with a count of excluded samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorStats {
    pub sum: f64,
    pub n: usize,
    pub excluded: usize,
}

impl ErrorStats {
    pub fn add(&mut self, actual: f64, estimated: f64) {
        match estimation_error(actual, estimated) {
            Some(e) => {
                self.sum += e;
                self.n += 1;
            }
            None => self.excluded += 1,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

/// Per-receiver stats for this step under `cfg`, for every node in the
/// control zone.
pub fn v2v_stats(world: &World, cfg: &CommConfig, rng: &mut SimRng) -> BTreeMap<VehicleId, Vec<(f64, f64)>> {
    let ns = nodes(world);
    let msgs = messages(world);
    let links = build_links(&ns, cfg);
    let receivers: Vec<VehicleId> = ns.iter().map(|n| n.id).collect();
    let got = deliver(&msgs, &receivers, &links, cfg.per, rng);
    let streams = world.intersection.mode().streams();
    got.into_iter().map(|(r, m)| (r, aggregate_estimates(&m, streams))).collect()
}
