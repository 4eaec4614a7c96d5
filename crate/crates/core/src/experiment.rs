//! Evaluation runs, sweeps, scenarios and their CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use std::collections::BTreeMap;

use crate::comms::{aggregate_estimates, deliver, messages, nodes, ErrorStats};
use crate::config::{ScenarioConfig, SweepAxis};
use crate::demand::{validate_demand, GehReport};
use crate::error::{Error, Result};
use crate::idm::DT;
use crate::learn::checkpoint;
use crate::learn::Mlp;
use crate::metrics::{self, awt_now, congestion_level, Scope, SLOPE_WINDOW};
use crate::rng::{derived_seed, substream, Substream};
use crate::runlog::RunLog;
use crate::sim::{NetPolicy, Policy, Simulation};
use crate::stream::StreamId;
use crate::training::EpochStats;
use crate::vehicle::VehicleId;
use crate::world::World;

/// Per-rollout metrics written to `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSummary {
    pub seed: u64,
    pub awt: f64,
    pub conflict_rate: Option<f64>,
    /// Entrance crossings per hour.
    pub throughput_vph: f64,
    pub avg_speed: Option<f64>,
    pub congested: bool,
    pub slope_pre: Option<f64>,
    pub slope_post: f64,
}

pub struct Rollout {
    pub log: RunLog,
    pub summary: RolloutSummary,
}

/// Loads the checkpoint when the scenario needs one and checks it matches the
/// intersection mode.
pub fn load_policy(cfg: &ScenarioConfig) -> Result<Option<Mlp>> {
    if !cfg.needs_policy() {
        return Ok(None);
    }
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("policy controller needs policy.checkpoint".into()))?;
    let (directions, net) = checkpoint::load(path)?;
    let want = cfg.mode.directions() as u32;
    if directions != want {
        return Err(Error::Checkpoint(format!(
            "{} was trained for {directions} directions, scenario has {want}",
            path.display()
        )));
    }
    Ok(Some(net))
}

/// Step index at which the first event fires.
pub fn first_event_step(cfg: &ScenarioConfig) -> Option<usize> {
    cfg.events.iter().map(|e| e.at_step as usize).min()
}

pub fn summarize(cfg: &ScenarioConfig, seed: u64, log: &RunLog) -> RolloutSummary {
    let w = metrics::full(log);
    let series = metrics::awt_series(log, Scope::Intersection, cfg.wait_mode);
    let (slope_pre, slope_post) = match first_event_step(cfg) {
        Some(e) if e < series.len() => (Some(metrics::awt_slope(&series[..e], SLOPE_WINDOW)), metrics::awt_slope(&series[e..], SLOPE_WINDOW)),
        _ => (None, metrics::awt_slope(&series, SLOPE_WINDOW)),
    };
    let hours = log.len() as f64 * DT / 3600.0;
    RolloutSummary {
        seed,
        awt: metrics::awt(log, Scope::Intersection, w.clone(), cfg.wait_mode).value,
        conflict_rate: metrics::conflict_rate(log, w.clone()),
        throughput_vph: metrics::throughput(log, w.clone()) as f64 / hours,
        avg_speed: metrics::avg_speed(log, w.clone()),
        congested: metrics::congested(log, w),
        slope_pre,
        slope_post,
    }
}

/// One rollout with seed `cfg.seed + k`.
pub fn run_rollout(cfg: &ScenarioConfig, net: Option<&Mlp>, k: u64) -> Result<Rollout> {
    let seed = derived_seed(cfg.seed, k);
    let mut sim = Simulation::new(cfg.sim_config(), seed)?;
    let mut policy = net.map(|n| NetPolicy::new(n.clone(), cfg.policy_epsilon, seed));
    sim.run(policy.as_mut().map(|p| p as &mut dyn Policy))?;
    let summary = summarize(cfg, seed, &sim.log);
    Ok(Rollout { log: sim.log, summary })
}

/// `cfg.repeats` rollouts, run in parallel, returned in repeat order.
pub fn run_eval(cfg: &ScenarioConfig) -> Result<Vec<Rollout>> {
    let net = load_policy(cfg)?;
    // Fail on bad configs before spawning anything.
    Simulation::new(cfg.sim_config(), cfg.seed)?;
    let net = net.as_ref();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.repeats as u64).map(|k| scope.spawn(move || run_rollout(cfg, net, k))).collect();
        handles.into_iter().map(|h| h.join().expect("rollout thread panicked")).collect()
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn rollout_header(cfg: &ScenarioConfig) -> String {
    let streams = cfg.mode.streams();
    let mut h = String::from("step,awt_intersection");
    for s in streams {
        let _ = write!(h, ",awt_{s}");
    }
    h.push_str(",avg_speed,throughput,conflict_rate_cum");
    for s in streams {
        let _ = write!(h, ",cl_{s}");
    }
    if !cfg.events.is_empty() {
        h.push_str(",event");
    }
    h
}

/// One row per step: AWT of the vehicles currently in the control zone,
/// cumulative throughput and conflict rate, congestion level per direction.
pub fn rollout_csv(cfg: &ScenarioConfig, log: &RunLog) -> String {
    let streams: &[StreamId] = cfg.mode.streams();
    let mut out = rollout_header(cfg);
    out.push('\n');
    let mut entered = 0usize;
    let (mut conflicts, mut decisions) = (0usize, 0usize);
    for r in &log.steps {
        entered += r.entered.len();
        conflicts += r.decisions.iter().filter(|d| d.conflict).count();
        decisions += r.decisions.len();
        let _ = write!(out, "{},{:.6}", r.step, awt_now(r, Scope::Intersection, cfg.wait_mode));
        let per: Vec<f64> = streams.iter().map(|&s| awt_now(r, Scope::Direction(s), cfg.wait_mode)).collect();
        for a in &per {
            let _ = write!(out, ",{a:.6}");
        }
        let rate = (decisions > 0).then(|| conflicts as f64 / decisions as f64);
        let _ = write!(out, ",{},{entered},{}", opt(metrics::avg_speed_now(r)), opt(rate));
        for a in &per {
            let _ = write!(out, ",{:.6}", congestion_level(*a, cfg.cl_threshold));
        }
        if !cfg.events.is_empty() {
            let _ = write!(out, ",{}", r.event.as_deref().unwrap_or(""));
        }
        out.push('\n');
    }
    out
}

pub const SUMMARY_HEADER: &str = "rollout,seed,awt,conflict_rate,throughput,avg_speed,congested,awt_slope_pre,awt_slope_post";

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Per-rollout rows followed by `mean` and `std` rows. Undefined values are
/// empty and left out of the aggregates.
pub fn summary_csv(rows: &[RolloutSummary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (k, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{:.6},{},{:.6},{},{},{},{:.6}",
            r.seed,
            r.awt,
            opt(r.conflict_rate),
            r.throughput_vph,
            opt(r.avg_speed),
            r.congested,
            opt(r.slope_pre),
            r.slope_post
        );
    }
    if rows.is_empty() {
        return out;
    }
    let col = |f: &dyn Fn(&RolloutSummary) -> Option<f64>| -> Option<(f64, f64)> {
        let xs: Vec<f64> = rows.iter().filter_map(f).collect();
        (!xs.is_empty()).then(|| mean_std(&xs))
    };
    let cols = [
        col(&|r| Some(r.awt)),
        col(&|r| r.conflict_rate),
        col(&|r| Some(r.throughput_vph)),
        col(&|r| r.avg_speed),
        col(&|r| Some(if r.congested { 1.0 } else { 0.0 })),
        col(&|r| r.slope_pre),
        col(&|r| Some(r.slope_post)),
    ];
    for (name, pick) in [("mean", 0), ("std", 1)] {
        let vals: Vec<String> = cols
            .iter()
            .map(|c| c.map(|ms| format!("{:.6}", if pick == 0 { ms.0 } else { ms.1 })).unwrap_or_default())
            .collect();
        let _ = writeln!(out, "{name},,{}", vals.join(","));
    }
    out
}

/// Aggregated result of one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub awt: f64,
    /// Majority vote over repeats.
    pub congested: bool,
    pub avg_speed: Option<f64>,
}

pub fn apply_sweep_value(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Demand => {
            for s in c.mode.streams() {
                c.demand.counts[s.index()] = value;
            }
        }
        SweepAxis::RvRate => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidArgument(format!("rv_rate {value} outside [0, 1]")));
            }
            c.demand.rv_rate = value;
        }
        SweepAxis::Per => c.comm.per = value,
    }
    c.demand.validate()?;
    c.comm.validate()?;
    Ok(c)
}

/// One evaluation per sweep value, all on the same seeds.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("sweep needs sweep.axis and sweep.values".into()))?;
    let mut rows = Vec::new();
    for &value in &sweep.values {
        let c = apply_sweep_value(cfg, sweep.axis, value)?;
        let rs = run_eval(&c)?;
        let n = rs.len() as f64;
        let speeds: Vec<f64> = rs.iter().filter_map(|r| r.summary.avg_speed).collect();
        rows.push(SweepRow {
            value,
            awt: rs.iter().map(|r| r.summary.awt).sum::<f64>() / n,
            congested: rs.iter().filter(|r| r.summary.congested).count() * 2 > rs.len(),
            avg_speed: (!speeds.is_empty()).then(|| speeds.iter().sum::<f64>() / speeds.len() as f64),
        });
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "value,awt,congested,avg_speed";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{},{}", r.value, r.awt, r.congested, opt(r.avg_speed));
    }
    out
}

pub const DEMAND_WINDOW_S: f64 = 7200.0;

/// Runs the scenario once (no per-step records) and compares entrance
/// counts over the last `window` seconds with the configured demand.
pub fn run_validate_demand(cfg: &ScenarioConfig, window: f64) -> Result<GehReport> {
    let net = load_policy(cfg)?;
    let mut sim = Simulation::new(cfg.sim_config(), cfg.seed)?;
    sim.record = false;
    let mut policy = net.map(|n| NetPolicy::new(n, cfg.policy_epsilon, cfg.seed));
    sim.run(policy.as_mut().map(|p| p as &mut dyn Policy))?;
    let streams = sim.world.intersection.active_streams().to_vec();
    validate_demand(&sim.entries, sim.world.time(), &cfg.demand, &streams, window)
}

pub const GEH_HEADER: &str = "stream,simulated_vph,configured_vph,geh";

pub fn geh_csv(report: &GehReport) -> String {
    let mut out = format!("{GEH_HEADER}\n");
    for (s, m, c, g) in &report.per_stream {
        let _ = writeln!(out, "{s},{m:.6},{c:.6},{g:.6}");
    }
    let _ = writeln!(out, "mean,,,{:.6}", report.mean);
    out
}

/// Mean estimation error of shared queue and waiting-time estimates at one
/// `(per, hops)` grid point, against lossless sharing.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationPoint {
    pub per: f64,
    pub hops: u32,
    pub queue: ErrorStats,
    pub wait: ErrorStats,
}

impl EstimationPoint {
    /// Mean over queue and waiting-time samples together.
    pub fn mean(&self) -> f64 {
        let n = self.queue.n + self.wait.n;
        if n == 0 {
            0.0
        } else {
            (self.queue.sum + self.wait.sum) / n as f64
        }
    }
}

/// Replays every snapshot with all node pairs forced to `hops` hops. Each
/// snapshot reuses the same comms stream at every grid point, so a delivery
/// lost at a lower loss rate is also lost at every higher one.
pub fn estimation_error_grid(snapshots: &[World], pers: &[f64], hops: &[u32], seed: u64) -> Vec<EstimationPoint> {
    let mut out = Vec::new();
    for &h in hops {
        for &per in pers {
            let mut point = EstimationPoint {
                per,
                hops: h,
                queue: ErrorStats::default(),
                wait: ErrorStats::default(),
            };
            for (k, world) in snapshots.iter().enumerate() {
                let ns = nodes(world);
                let msgs = messages(world);
                let receivers: Vec<VehicleId> = ns.iter().map(|n| n.id).collect();
                let mut links = BTreeMap::new();
                for a in &receivers {
                    for b in &receivers {
                        if a != b {
                            links.insert((*a, *b), h);
                        }
                    }
                }
                let streams = world.intersection.mode().streams();
                let reference = aggregate_estimates(&msgs, streams);
                let mut rng = substream(derived_seed(seed, k as u64), Substream::Comms);
                for (_, got) in deliver(&msgs, &receivers, &links, per, &mut rng) {
                    for ((est, actual), j) in aggregate_estimates(&got, streams).iter().zip(&reference).zip(streams) {
                        // Directions nobody reports on carry no information.
                        if !msgs.iter().any(|m| m.stream == *j) {
                            continue;
                        }
                        point.queue.add(actual.0, est.0);
                        point.wait.add(actual.1, est.1);
                    }
                }
            }
            out.push(point);
        }
    }
    out
}

/// World snapshots after each step past `warmup` of one run of the scenario.
pub fn snapshots(cfg: &ScenarioConfig, net: Option<&Mlp>, warmup: u64) -> Result<Vec<World>> {
    let mut sim = Simulation::new(cfg.sim_config(), cfg.seed)?;
    sim.record = false;
    let mut policy = net.map(|n| NetPolicy::new(n.clone(), cfg.policy_epsilon, cfg.seed));
    let mut out = Vec::new();
    while !sim.done() {
        sim.step(policy.as_mut().map(|p| p as &mut dyn Policy))?;
        if sim.world.step > warmup {
            out.push(sim.world.clone());
        }
    }
    Ok(out)
}

pub const CURVES_HEADER: &str = "epoch,cumulative_wait,conflicts,decisions,epsilon,steps,early_stop";

pub fn curves_csv(curves: &[EpochStats]) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    for e in curves {
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{:.6},{},{}",
            e.epoch, e.cumulative_wait, e.conflicts, e.decisions, e.epsilon, e.steps, e.early_stop
        );
    }
    out
}

/// Writes through a temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn header_lists_directions() {
        let c = parse_config("controller = notl\n").unwrap();
        let h = rollout_header(&c);
        assert!(h.starts_with("step,awt_intersection,awt_E-L,awt_E-C,"));
        assert!(h.ends_with("cl_S-L,cl_S-C"));
        assert_eq!(h.split(',').count(), 2 + 8 + 3 + 8);
    }

    #[test]
    fn summary_aggregates_skip_undefined() {
        let r = |awt: f64, cr: Option<f64>| RolloutSummary {
            seed: 0,
            awt,
            conflict_rate: cr,
            throughput_vph: 100.0,
            avg_speed: Some(2.0),
            congested: false,
            slope_pre: None,
            slope_post: 0.0,
        };
        let s = summary_csv(&[r(1.0, None), r(3.0, Some(0.5))]);
        let mean = s.lines().find(|l| l.starts_with("mean")).unwrap();
        assert_eq!(mean, "mean,,2.000000,0.500000,100.000000,2.000000,0.000000,,0.000000");
        let std = s.lines().find(|l| l.starts_with("std")).unwrap();
        assert!(std.starts_with("std,,1.414214,0.000000,"));
    }

    #[test]
    fn policy_without_checkpoint_is_rejected() {
        let c = parse_config("controller = policy\n").unwrap();
        assert!(run_eval(&c).is_err());
    }
}
