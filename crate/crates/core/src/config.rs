//! Scenario configuration in a dotted-key text format.
//!
//! One `key = value` pair per line; `#` starts a comment; blank lines are
//! ignored. Keys are case-sensitive, each may appear once, and unknown keys
//! are rejected. Only `controller` is required. Per-stream keys use stream
//! names such as `E-L`, e.g. `demand.counts.E-L = 120`.
//!
//! The manifest written next to every run lists every effective key in
//! sorted order and parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::comms::{CommConfig, Protocol};
use crate::control::{ControllerKind, EventKind, EventSpec, Phase, PhasePlan};
use crate::demand::{ArrivalModel, DemandProfile};
use crate::error::{Error, Result};
use crate::idm::IdmParams;
use crate::intersection::{IntersectionSpec, DEFAULT_APPROACH_LENGTH, DEFAULT_CONTROL_ZONE_RADIUS, DEFAULT_EXIT_LENGTH};
use crate::learn::LearnConfig;
use crate::metrics::{WaitMode, DEFAULT_CL_THRESHOLD};
use crate::perception::StatsSource;
use crate::sim::SimConfig;
use crate::stream::{Approach, Mode, StreamId};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Demand,
    RvRate,
    Per,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub approaches: Vec<Approach>,
    pub mode: Mode,
    /// Lanes per stream, canonical index.
    pub lanes: [u32; 12],
    pub control_zone_radius: f64,
    pub approach_length: f64,
    pub exit_length: f64,
    pub demand: DemandProfile,
    pub controller: ControllerKind,
    pub checkpoint: Option<PathBuf>,
    pub stats_source: StatsSource,
    pub policy_epsilon: f64,
    pub resolution: bool,
    pub plan: PhasePlan,
    pub comm: CommConfig,
    pub events: Vec<EventSpec>,
    pub horizon: u64,
    pub seed: u64,
    pub repeats: u32,
    pub cl_threshold: f64,
    pub wait_mode: WaitMode,
    pub learn: LearnConfig,
    pub sweep: Option<Sweep>,
}

impl ScenarioConfig {
    /// Defaults for everything but the controller.
    pub fn with_controller(controller: ControllerKind) -> Self {
        let mode = Mode::EightDirection;
        ScenarioConfig {
            approaches: Approach::ALL.to_vec(),
            mode,
            lanes: IntersectionSpec::uniform_lanes(mode, 1),
            control_zone_radius: DEFAULT_CONTROL_ZONE_RADIUS,
            approach_length: DEFAULT_APPROACH_LENGTH,
            exit_length: DEFAULT_EXIT_LENGTH,
            demand: DemandProfile::uniform(mode.streams(), 200.0, ArrivalModel::Poisson, 0.5),
            controller,
            checkpoint: None,
            stats_source: StatsSource::GroundTruth,
            policy_epsilon: 0.0,
            resolution: true,
            plan: PhasePlan::default(),
            comm: CommConfig::default(),
            events: Vec::new(),
            horizon: 1000,
            seed: 0,
            repeats: 1,
            cl_threshold: DEFAULT_CL_THRESHOLD,
            wait_mode: WaitMode::Accumulated,
            learn: LearnConfig::default(),
            sweep: None,
        }
    }

    pub fn intersection_spec(&self) -> IntersectionSpec {
        let mut spec = IntersectionSpec::from_layout(&self.approaches, self.lanes, self.mode);
        spec.control_zone_radius = self.control_zone_radius;
        spec.approach_length = self.approach_length;
        spec.exit_length = self.exit_length;
        spec
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            intersection: self.intersection_spec(),
            idm: IdmParams::default(),
            demand: self.demand.clone(),
            controller: self.controller,
            plan: self.plan.clone(),
            stats_source: self.stats_source,
            comm: self.comm,
            resolution: self.resolution,
            events: self.events.clone(),
            horizon: self.horizon,
            reward: Default::default(),
        }
    }

    /// Whether a trained network is needed at any point of the run.
    pub fn needs_policy(&self) -> bool {
        self.controller == ControllerKind::Policy
            || self
                .events
                .iter()
                .any(|e| matches!(e.kind, EventKind::Blackout { successor: ControllerKind::Policy }))
    }

    /// Every effective key, sorted, preceded by a version line.
    pub fn manifest(&self) -> String {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("intersection.approaches", self.approaches.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(","));
        put("intersection.mode", self.mode.directions().to_string());
        for s in self.mode.streams() {
            put(&format!("intersection.lanes.{s}"), self.lanes[s.index()].to_string());
            put(&format!("demand.counts.{s}"), fmt_f(self.demand.counts[s.index()]));
        }
        put("intersection.control_zone_radius", fmt_f(self.control_zone_radius));
        put("intersection.approach_length", fmt_f(self.approach_length));
        put("intersection.exit_length", fmt_f(self.exit_length));
        put(
            "demand.arrival_model",
            match self.demand.arrival_model {
                ArrivalModel::Poisson => "poisson",
                ArrivalModel::Uniform => "uniform",
            }
            .into(),
        );
        put("demand.rv_rate", fmt_f(self.demand.rv_rate));
        put("controller", self.controller.to_string());
        if let Some(p) = &self.checkpoint {
            put("policy.checkpoint", p.display().to_string());
        }
        put(
            "policy.stats_source",
            match self.stats_source {
                StatsSource::GroundTruth => "ground_truth",
                StatsSource::V2v => "v2v",
            }
            .into(),
        );
        put("policy.epsilon", fmt_f(self.policy_epsilon));
        put("policy.resolution", self.resolution.to_string());
        put("tl.phases", format_phases(&self.plan));
        put(
            "comm.protocol",
            match self.comm.protocol {
                Protocol::LongRange => "long_range",
                Protocol::ShortRange => "short_range",
            }
            .into(),
        );
        put("comm.long_range_radius", fmt_f(self.comm.long_range_radius));
        put("comm.hop_range", fmt_f(self.comm.hop_range));
        put("comm.max_hops", self.comm.max_hops.to_string());
        put("comm.per", fmt_f(self.comm.per));
        for (k, e) in self.events.iter().enumerate() {
            put(&format!("event.{k}.at_step"), e.at_step.to_string());
            match e.kind {
                EventKind::Blackout { successor } => {
                    put(&format!("event.{k}.kind"), "blackout".into());
                    put(&format!("event.{k}.successor"), successor.to_string());
                }
                EventKind::RvDrop { target_rate } => {
                    put(&format!("event.{k}.kind"), "rv_drop".into());
                    put(&format!("event.{k}.target_rate"), fmt_f(target_rate));
                }
            }
        }
        put("run.horizon", self.horizon.to_string());
        put("run.seed", self.seed.to_string());
        put("run.repeats", self.repeats.to_string());
        put("metrics.cl_threshold", fmt_f(self.cl_threshold));
        put("metrics.wait_mode", self.wait_mode.to_string());
        let l = &self.learn;
        put("learn.gamma", fmt_f(l.gamma));
        put("learn.lr", fmt_f(l.lr));
        put("learn.momentum", fmt_f(l.momentum));
        put("learn.batch", l.batch.to_string());
        put("learn.buffer_capacity", l.buffer_capacity.to_string());
        put("learn.priority_alpha", fmt_f(l.priority_alpha));
        put("learn.is_beta_start", fmt_f(l.is_beta_start));
        put("learn.is_beta_end", fmt_f(l.is_beta_end));
        put("learn.is_beta_updates", l.is_beta_updates.to_string());
        put("learn.target_sync_every", l.target_sync_every.to_string());
        put("learn.epsilon_start", fmt_f(l.epsilon_start));
        put("learn.epsilon_end", fmt_f(l.epsilon_end));
        put("learn.epsilon_decay", l.epsilon_decay.to_string());
        put("learn.warmup", l.warmup.to_string());
        put("learn.grad_clip", fmt_f(l.grad_clip));
        put("learn.episodes", l.episodes.to_string());
        put("learn.episode_steps", l.episode_steps.to_string());
        put("learn.resolution", l.resolution.to_string());
        if let Some(sw) = &self.sweep {
            put(
                "sweep.axis",
                match sw.axis {
                    SweepAxis::Demand => "demand",
                    SweepAxis::RvRate => "rv_rate",
                    SweepAxis::Per => "per",
                }
                .into(),
            );
            put("sweep.values", sw.values.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(","));
        }
        let mut out = format!("# cxflow {VERSION}\n");
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Shortest decimal form that parses back to the same value.
fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

fn format_phases(plan: &PhasePlan) -> String {
    plan.phases
        .iter()
        .map(|p| {
            let green = p.green.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("+");
            format!("{green}/{}/{}/{}", fmt_f(p.green_s), fmt_f(p.yellow_s), fmt_f(p.all_red_s))
        })
        .collect::<Vec<_>>()
        .join(",")
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
}

fn err(line: usize, key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn parsed<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| err(line, key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn f64_in(&mut self, key: &str, lo: f64, hi: f64, default: f64) -> Result<f64> {
        let line = self.line(key);
        let v = self.parsed::<f64>(key, "a number")?.unwrap_or(default);
        if !(v >= lo && v <= hi) {
            return Err(err(line, key, format!("{v} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let line = self.line(key);
        let v = self.parsed::<f64>(key, "a number")?.unwrap_or(default);
        if !(v > 0.0 && v.is_finite()) {
            return Err(err(line, key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn enumerated(&mut self, key: &str, choices: &[&str]) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                if choices.contains(&v.as_str()) {
                    Ok(Some(v))
                } else {
                    Err(err(line, key, format!("expected one of {}, got `{v}`", choices.join(" | "))))
                }
            }
        }
    }

    fn prefixed(&self, prefix: &str) -> Vec<String> {
        self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect()
    }
}

fn tokenize(text: &str) -> Result<Reader> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(err(line, content, "expected `key = value`"));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(err(line, k, "empty key"));
        }
        if let Some(prev) = entries.insert(
            k.to_string(),
            Entry {
                line,
                value: v.to_string(),
                used: false,
            },
        ) {
            return Err(err(line, k, format!("duplicate key, first set on line {}", prev.line)));
        }
    }
    Ok(Reader { entries })
}

fn parse_phases(line: usize, key: &str, v: &str) -> Result<PhasePlan> {
    let mut phases = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split('/').collect();
        if parts.len() != 4 {
            return Err(err(line, key, format!("phase `{item}` must be streams/green/yellow/all_red")));
        }
        let green = parts[0]
            .split('+')
            .map(|s| s.trim().parse::<StreamId>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| err(line, key, e.to_string()))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(line, key, format!("bad duration `{s}`")));
        phases.push(Phase {
            green,
            green_s: num(parts[1])?,
            yellow_s: num(parts[2])?,
            all_red_s: num(parts[3])?,
        });
    }
    Ok(PhasePlan { phases })
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut r = tokenize(text)?;

    let controller = match r.enumerated("controller", &["tl", "notl", "policy"])? {
        Some(c) => c.parse()?,
        None => return Err(err(0, "controller", "required key missing")),
    };
    let mut c = ScenarioConfig::with_controller(controller);

    if let Some((line, v)) = r.take("intersection.mode") {
        c.mode = v
            .parse::<usize>()
            .ok()
            .and_then(Mode::from_directions)
            .ok_or_else(|| err(line, "intersection.mode", format!("expected 8 or 12, got `{v}`")))?;
    }
    if let Some((line, v)) = r.take("intersection.approaches") {
        let mut a = v
            .split(',')
            .map(|s| s.trim().parse::<Approach>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| err(line, "intersection.approaches", e.to_string()))?;
        a.sort();
        a.dedup();
        if !(3..=4).contains(&a.len()) {
            return Err(err(line, "intersection.approaches", "need 3 or 4 distinct approaches"));
        }
        c.approaches = a;
    }
    let per_movement: u32 = r.parsed("intersection.lanes_per_movement", "a lane count")?.unwrap_or(1);
    c.lanes = IntersectionSpec::uniform_lanes(c.mode, per_movement);
    for key in r.prefixed("intersection.lanes.") {
        let line = r.line(&key);
        let s: StreamId = key["intersection.lanes.".len()..].parse().map_err(|_| err(line, &key, "unknown stream"))?;
        if !c.mode.streams().contains(&s) {
            return Err(err(line, &key, format!("{s} is not a controlled stream in this mode")));
        }
        c.lanes[s.index()] = r.parsed(&key, "a lane count")?.expect("present");
    }
    c.control_zone_radius = r.positive("intersection.control_zone_radius", c.control_zone_radius)?;
    c.approach_length = r.positive("intersection.approach_length", c.approach_length)?;
    c.exit_length = r.positive("intersection.exit_length", c.exit_length)?;

    let base = r.f64_in("demand.count", 0.0, f64::MAX, 200.0)?;
    let mut counts = [0.0; 12];
    for s in c.mode.streams() {
        counts[s.index()] = base;
    }
    for key in r.prefixed("demand.counts.") {
        let line = r.line(&key);
        let s: StreamId = key["demand.counts.".len()..].parse().map_err(|_| err(line, &key, "unknown stream"))?;
        if !c.mode.streams().contains(&s) {
            return Err(err(line, &key, format!("{s} is not a controlled stream in this mode")));
        }
        counts[s.index()] = r.f64_in(&key, 0.0, f64::MAX, 0.0)?;
    }
    c.demand.counts = counts;
    if let Some(m) = r.enumerated("demand.arrival_model", &["poisson", "uniform"])? {
        c.demand.arrival_model = if m == "poisson" { ArrivalModel::Poisson } else { ArrivalModel::Uniform };
    }
    c.demand.rv_rate = r.f64_in("demand.rv_rate", 0.0, 1.0, c.demand.rv_rate)?;

    c.checkpoint = r.take("policy.checkpoint").map(|(_, v)| PathBuf::from(v));
    if let Some(s) = r.enumerated("policy.stats_source", &["ground_truth", "v2v"])? {
        c.stats_source = if s == "v2v" { StatsSource::V2v } else { StatsSource::GroundTruth };
    }
    c.policy_epsilon = r.f64_in("policy.epsilon", 0.0, 1.0, 0.0)?;
    c.resolution = r.parsed("policy.resolution", "true or false")?.unwrap_or(true);

    if let Some((line, v)) = r.take("tl.phases") {
        c.plan = parse_phases(line, "tl.phases", &v)?;
    }

    if let Some(p) = r.enumerated("comm.protocol", &["long_range", "short_range"])? {
        c.comm.protocol = if p == "long_range" { Protocol::LongRange } else { Protocol::ShortRange };
    }
    c.comm.long_range_radius = r.positive("comm.long_range_radius", c.comm.long_range_radius)?;
    c.comm.hop_range = r.positive("comm.hop_range", c.comm.hop_range)?;
    c.comm.max_hops = r.parsed("comm.max_hops", "a hop count")?.unwrap_or(c.comm.max_hops);
    c.comm.per = r.f64_in("comm.per", 0.0, 1.0, c.comm.per)?;

    let mut event_ids: Vec<usize> = Vec::new();
    for key in r.prefixed("event.") {
        let line = r.line(&key);
        let id = key
            .split('.')
            .nth(1)
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| err(line, &key, "event keys look like event.<n>.<field>"))?;
        if !event_ids.contains(&id) {
            event_ids.push(id);
        }
    }
    event_ids.sort_unstable();
    for id in event_ids {
        let k = |f: &str| format!("event.{id}.{f}");
        let kind_key = k("kind");
        let kind = r
            .enumerated(&kind_key, &["blackout", "rv_drop"])?
            .ok_or_else(|| err(0, &kind_key, "required for every event"))?;
        let at_step = r
            .parsed::<u64>(&k("at_step"), "a step index")?
            .ok_or_else(|| err(0, &k("at_step"), "required for every event"))?;
        let kind = if kind == "blackout" {
            let successor = r
                .enumerated(&k("successor"), &["tl", "notl", "policy"])?
                .ok_or_else(|| err(0, &k("successor"), "required for blackout events"))?;
            EventKind::Blackout {
                successor: successor.parse()?,
            }
        } else {
            let target_rate = r.f64_in(&k("target_rate"), 0.0, 1.0, f64::NAN).map_err(|_| {
                err(r.line(&k("target_rate")), &k("target_rate"), "required rate in [0, 1] for rv_drop events")
            })?;
            if target_rate > c.demand.rv_rate {
                return Err(err(r.line(&k("target_rate")), &k("target_rate"), "exceeds demand.rv_rate"));
            }
            EventKind::RvDrop { target_rate }
        };
        c.events.push(EventSpec { kind, at_step });
    }

    c.horizon = r.parsed("run.horizon", "a step count")?.unwrap_or(c.horizon);
    if c.horizon == 0 {
        return Err(err(r.line("run.horizon"), "run.horizon", "must be positive"));
    }
    c.seed = r.parsed("run.seed", "an unsigned integer")?.unwrap_or(0);
    c.repeats = r.parsed("run.repeats", "a count")?.unwrap_or(1);
    if c.repeats == 0 {
        return Err(err(r.line("run.repeats"), "run.repeats", "must be positive"));
    }
    c.cl_threshold = r.positive("metrics.cl_threshold", c.cl_threshold)?;
    if let Some(m) = r.enumerated("metrics.wait_mode", &["accumulated", "max_interval"])? {
        c.wait_mode = m.parse()?;
    }

    let l = &mut c.learn;
    l.gamma = r.f64_in("learn.gamma", 0.0, 0.999_999, l.gamma)?;
    l.lr = r.positive("learn.lr", l.lr)?;
    l.momentum = r.f64_in("learn.momentum", 0.0, 0.999_999, l.momentum)?;
    l.batch = r.parsed("learn.batch", "a count")?.unwrap_or(l.batch);
    l.buffer_capacity = r.parsed("learn.buffer_capacity", "a count")?.unwrap_or(l.buffer_capacity);
    l.priority_alpha = r.f64_in("learn.priority_alpha", 0.0, 1.0, l.priority_alpha)?;
    l.is_beta_start = r.f64_in("learn.is_beta_start", 0.0, 1.0, l.is_beta_start)?;
    l.is_beta_end = r.f64_in("learn.is_beta_end", 0.0, 1.0, l.is_beta_end)?;
    l.is_beta_updates = r.parsed("learn.is_beta_updates", "a count")?.unwrap_or(l.is_beta_updates);
    l.target_sync_every = r.parsed("learn.target_sync_every", "a count")?.unwrap_or(l.target_sync_every);
    l.epsilon_start = r.f64_in("learn.epsilon_start", 0.0, 1.0, l.epsilon_start)?;
    l.epsilon_end = r.f64_in("learn.epsilon_end", 0.0, 1.0, l.epsilon_end)?;
    l.epsilon_decay = r.parsed("learn.epsilon_decay", "a count")?.unwrap_or(l.epsilon_decay);
    l.warmup = r.parsed("learn.warmup", "a count")?.unwrap_or(l.warmup);
    l.grad_clip = r.positive("learn.grad_clip", l.grad_clip)?;
    l.episodes = r.parsed("learn.episodes", "a count")?.unwrap_or(l.episodes);
    l.episode_steps = r.parsed("learn.episode_steps", "a count")?.unwrap_or(l.episode_steps);
    l.resolution = r.parsed("learn.resolution", "true or false")?.unwrap_or(l.resolution);
    l.validate().map_err(|e| err(0, "learn", e.to_string()))?;

    let axis = r.enumerated("sweep.axis", &["demand", "rv_rate", "per"])?;
    let values = r.take("sweep.values");
    c.sweep = match (axis, values) {
        (None, None) => None,
        (Some(a), Some((line, v))) => {
            let values = v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| err(line, "sweep.values", "expected comma-separated numbers"))?;
            if values.is_empty() {
                return Err(err(line, "sweep.values", "needs at least one value"));
            }
            Some(Sweep {
                axis: match a.as_str() {
                    "demand" => SweepAxis::Demand,
                    "rv_rate" => SweepAxis::RvRate,
                    _ => SweepAxis::Per,
                },
                values,
            })
        }
        _ => return Err(err(0, "sweep", "sweep.axis and sweep.values go together")),
    };

    if let Some((k, e)) = r.entries.iter().find(|(_, e)| !e.used) {
        return Err(err(e.line, k, "unknown key"));
    }
    let x = crate::intersection::build_intersection(c.intersection_spec())?;
    c.plan.validate(&x).map_err(|e| err(r.line("tl.phases"), "tl.phases", e.to_string()))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_fully_defaulted() {
        let c = parse_config("controller = notl\n").unwrap();
        assert_eq!(c, ScenarioConfig::with_controller(ControllerKind::NoTl));
        let m = c.manifest();
        assert!(m.starts_with("# cxflow "));
        assert!(m.contains("\ncontroller = notl\n"));
        assert!(m.contains("\nintersection.control_zone_radius = 30.0\n"));
    }

    #[test]
    fn out_of_range_rate_names_key() {
        let e = parse_config("controller = tl\ndemand.rv_rate = 1.4\n").unwrap_err();
        match e {
            Error::Config { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "demand.rv_rate");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_and_missing_keys() {
        assert!(matches!(parse_config("controller = tl\nfoo.bar = 1\n"), Err(Error::Config { ref key, .. }) if key == "foo.bar"));
        assert!(matches!(parse_config("demand.count = 3\n"), Err(Error::Config { ref key, .. }) if key == "controller"));
        assert!(matches!(parse_config("controller = tl\nrun.horizon = soon\n"), Err(Error::Config { line: 2, .. })));
        assert!(parse_config("controller = tl\ncontroller = notl\n").is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let text = "\
# blackout scenario
controller = tl
intersection.mode = 12
intersection.lanes.E-R = 2
demand.counts.N-C = 333.5
demand.rv_rate = 0.9
event.0.kind = blackout
event.0.at_step = 100
event.0.successor = policy
event.1.kind = rv_drop
event.1.at_step = 200
event.1.target_rate = 0.5
comm.protocol = short_range
comm.per = 0.1
sweep.axis = rv_rate
sweep.values = 0, 0.05, 0.1
policy.checkpoint = /tmp/x.cxf
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.events.len(), 2);
        let back = parse_config(&c.manifest()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.manifest(), c.manifest());
    }

    #[test]
    fn three_way_layout() {
        let c = parse_config("controller = notl\nintersection.approaches = W,N,S\n").unwrap();
        let x = crate::intersection::build_intersection(c.intersection_spec()).unwrap();
        let names: Vec<String> = x.active_streams().iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["W-L", "N-C", "S-L", "S-C"]);
    }
}
