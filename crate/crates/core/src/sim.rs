//! One simulation run: demand, entry control, decisions, physics and the
//! run log, advanced one second at a time.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::comms::{v2v_stats, CommConfig};
use crate::control::{
    actuation, drop_probability, notl_entry_rule, priority_score, resolve_conflicts, Candidate, ControllerKind, EventKind,
    EventSpec, PhasePlan, HOLD_DISTANCE,
};
use crate::demand::{arrivals, DemandProfile, Spawner};
use crate::error::{Error, Result};
use crate::idm::{IdmParams, DT};
use crate::intersection::{build_intersection, IntersectionSpec};
use crate::learn::dqn::act;
use crate::learn::{reward, Learner, Mlp, RewardParams};
use crate::perception::{direction_index, encode_observation, encoded_len, ground_truth_stats, StatsSource};
use crate::rng::{substream, SimRng, Substream};
use crate::runlog::{DecisionRecord, RunLog, StepRecord, VehicleRecord};
use crate::stream::StreamId;
use crate::vehicle::{Action, VehicleId, Zone};
use crate::world::{Controls, World, WorldEvent};

/// Everything that defines a run apart from its seed.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub intersection: IntersectionSpec,
    pub idm: IdmParams,
    pub demand: DemandProfile,
    pub controller: ControllerKind,
    pub plan: PhasePlan,
    pub stats_source: StatsSource,
    pub comm: CommConfig,
    /// Gate RV entries through the conflict-resolution mechanism.
    pub resolution: bool,
    pub events: Vec<EventSpec>,
    pub horizon: u64,
    pub reward: RewardParams,
}

impl SimConfig {
    pub fn new(intersection: IntersectionSpec, demand: DemandProfile, controller: ControllerKind) -> Self {
        SimConfig {
            intersection,
            idm: IdmParams::default(),
            demand,
            controller,
            plan: PhasePlan::default(),
            stats_source: StatsSource::GroundTruth,
            comm: CommConfig::default(),
            resolution: true,
            events: Vec::new(),
            horizon: 1000,
            reward: RewardParams::default(),
        }
    }
}

/// Source of Stop/Go actions for a batch of observation rows.
pub trait Policy {
    /// One `(action, explored)` per row.
    fn decide(&mut self, obs: ArrayView2<f64>) -> Result<Vec<(Action, bool)>>;
}

impl Policy for Learner {
    fn decide(&mut self, obs: ArrayView2<f64>) -> Result<Vec<(Action, bool)>> {
        self.act_batch(obs)
    }
}

/// Fixed network with optional ε-greedy exploration.
pub struct NetPolicy {
    pub net: Mlp,
    pub epsilon: f64,
    rng: SimRng,
}

impl NetPolicy {
    pub fn new(net: Mlp, epsilon: f64, seed: u64) -> Self {
        NetPolicy {
            net,
            epsilon,
            rng: substream(seed, Substream::Exploration),
        }
    }
}

impl Policy for NetPolicy {
    fn decide(&mut self, obs: ArrayView2<f64>) -> Result<Vec<(Action, bool)>> {
        let q = self.net.forward_batch(obs)?;
        Ok(q.rows().into_iter().map(|r| act(&[r[0], r[1]], self.epsilon, &mut self.rng)).collect())
    }
}

/// Always the same action.
pub struct ConstantPolicy(pub Action);

impl Policy for ConstantPolicy {
    fn decide(&mut self, obs: ArrayView2<f64>) -> Result<Vec<(Action, bool)>> {
        Ok(vec![(self.0, false); obs.nrows()])
    }
}

/// Uniformly random actions.
pub struct RandomPolicy(pub SimRng);

impl Policy for RandomPolicy {
    fn decide(&mut self, obs: ArrayView2<f64>) -> Result<Vec<(Action, bool)>> {
        Ok((0..obs.nrows()).map(|_| (Action::from_index(self.0.random_range(0..2)), true)).collect())
    }
}

/// A decision made this step together with its network input.
#[derive(Debug, Clone)]
pub struct Decision {
    pub id: VehicleId,
    pub features: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub conflict: bool,
}

pub struct Simulation {
    pub cfg: SimConfig,
    pub world: World,
    spawner: Spawner,
    controller: ControllerKind,
    kind_rng: SimRng,
    comms_rng: SimRng,
    events_rng: SimRng,
    pub log: RunLog,
    /// Keep per-step records (vehicle snapshots dominate memory).
    pub record: bool,
    /// `(time, stream)` of every entrance crossing, kept even without records.
    pub entries: Vec<(f64, StreamId)>,
}

/// Vehicles close enough to the entrance to cross it next step.
pub fn in_entry_window(v: &crate::vehicle::Vehicle, p: &IdmParams) -> bool {
    let d = v.distance_to_entrance();
    !v.entered() && (d < HOLD_DISTANCE || d <= v.v * DT + p.a_max * DT * DT)
}

impl Simulation {
    pub fn new(cfg: SimConfig, seed: u64) -> Result<Self> {
        cfg.demand.validate()?;
        cfg.comm.validate()?;
        if cfg.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let x = build_intersection(cfg.intersection.clone())?;
        cfg.plan.validate(&x)?;
        for e in &cfg.events {
            if let EventKind::RvDrop { target_rate } = e.kind {
                drop_probability(cfg.demand.rv_rate, target_rate)?;
            }
        }
        let schedule = arrivals(
            &cfg.demand,
            x.active_streams(),
            cfg.horizon as f64 * DT,
            &mut substream(seed, Substream::Demand),
        );
        let world = World::new(x, cfg.idm);
        Ok(Simulation {
            spawner: Spawner::new(schedule, cfg.demand.rv_rate),
            controller: cfg.controller,
            kind_rng: substream(seed, Substream::Kind),
            comms_rng: substream(seed, Substream::Comms),
            events_rng: substream(seed, Substream::Events),
            log: RunLog::default(),
            record: true,
            entries: Vec::new(),
            world,
            cfg,
        })
    }

    pub fn controller(&self) -> ControllerKind {
        self.controller
    }

    pub fn done(&self) -> bool {
        self.world.step >= self.cfg.horizon
    }

    pub fn spawner(&self) -> &Spawner {
        &self.spawner
    }

    pub fn input_width(&self) -> usize {
        encoded_len(self.world.intersection.mode().directions())
    }

    fn apply_events(&mut self) -> Result<Option<String>> {
        let now = self.world.step;
        let mut labels = Vec::new();
        for e in self.cfg.events.clone() {
            if e.at_step != now {
                continue;
            }
            match e.kind {
                EventKind::Blackout { successor } => {
                    self.controller = successor;
                    labels.push(format!("blackout:{successor}"));
                }
                EventKind::RvDrop { target_rate } => {
                    let p = drop_probability(self.spawner.online_rate, target_rate)?;
                    for v in self.world.vehicles.iter_mut().filter(|v| v.is_controlled_rv()) {
                        if self.events_rng.random::<f64>() < p {
                            v.offline = true;
                        }
                    }
                    self.spawner.online_rate = target_rate;
                    labels.push(format!("rv_drop:{target_rate}"));
                }
            }
        }
        Ok(if labels.is_empty() { None } else { Some(labels.join(";")) })
    }

    /// Advances one step. `policy` is required while the policy controller
    /// is active and RVs need decisions.
    pub fn step<'p>(&mut self, mut policy: Option<&mut (dyn Policy + 'p)>) -> Result<Vec<Decision>> {
        let event = self.apply_events()?;
        let t = self.world.time();
        self.spawner.spawn_due(&mut self.world, t, &mut self.kind_rng);
        if self.record && self.log.steps.is_empty() && self.world.step == 0 {
            self.log.initial = self.world.vehicles.iter().map(VehicleRecord::from).collect();
        }

        let p = self.world.params;
        let fronts = self.world.front_vehicles();
        let window: Vec<usize> = fronts
            .iter()
            .copied()
            .filter(|&i| !self.world.vehicles[i].entry_granted && in_entry_window(&self.world.vehicles[i], &p))
            .collect();
        let mut grants: Vec<VehicleId> = Vec::new();
        let mut controls = Controls::new();
        let mut decisions = Vec::new();
        let mut records = Vec::new();

        match self.controller {
            ControllerKind::Tl => {
                let green = self.cfg.plan.green_at(t);
                for &i in &window {
                    let v = &self.world.vehicles[i];
                    if green.contains(&v.stream) {
                        grants.push(v.id);
                    }
                }
            }
            ControllerKind::NoTl => {
                for &i in &window {
                    let v = &self.world.vehicles[i];
                    if notl_entry_rule(v, &self.world) {
                        grants.push(v.id);
                    }
                }
            }
            ControllerKind::Policy => {
                let (d, r) = self.policy_step(&window, &mut grants, &mut controls, policy.as_deref_mut())?;
                decisions = d;
                records = r;
            }
        }

        for id in &grants {
            if let Some(v) = self.world.get_mut(*id) {
                v.entry_granted = true;
            }
        }
        let events = self.world.step(&controls);

        // Rewards use the ground-truth wait of each RV's own direction after
        // the step.
        let gt = ground_truth_stats(&self.world);
        let x = &self.world.intersection;
        for (d, rec) in decisions.iter_mut().zip(records.iter_mut()) {
            let k = direction_index(x, rec.stream).expect("active stream");
            d.reward = reward(d.action, gt[k].1, d.conflict, &self.cfg.reward);
            rec.reward = d.reward;
        }

        let now = self.world.time();
        for e in &events {
            if let WorldEvent::Enter { stream, .. } = e {
                self.entries.push((now, *stream));
            }
        }
        if self.record {
            let mut entered = Vec::new();
            let mut exited = Vec::new();
            let mut conflicts = Vec::new();
            for e in events {
                match e {
                    WorldEvent::Enter { id, stream } => entered.push((id, stream)),
                    WorldEvent::Exit { id, stream } => exited.push((id, stream)),
                    WorldEvent::Conflict { a, b } => conflicts.push((a, b)),
                    WorldEvent::Spawn { .. } => {}
                }
            }
            self.log.push(StepRecord {
                step: self.world.step,
                controller: self.controller,
                event,
                vehicles: self.world.vehicles.iter().map(VehicleRecord::from).collect(),
                decisions: records,
                grants,
                entered,
                exited,
                conflicts,
            });
        }
        Ok(decisions)
    }

    /// Decisions, conflict flags, grants and actuation under the learned
    /// policy; HVs and offline RVs use the NoTL entry rule.
    fn policy_step<'p>(
        &mut self,
        window: &[usize],
        grants: &mut Vec<VehicleId>,
        controls: &mut Controls,
        policy: Option<&mut (dyn Policy + 'p)>,
    ) -> Result<(Vec<Decision>, Vec<DecisionRecord>)> {
        let world = &self.world;
        let x = &world.intersection;
        let p = world.params;

        // Streams holding the intersection before anything is granted.
        let held_before: Vec<StreamId> = x
            .active_streams()
            .iter()
            .copied()
            .filter(|&s| world.stream_holds_intersection(s))
            .collect();

        for &i in window {
            let v = &world.vehicles[i];
            if !v.is_controlled_rv() && notl_entry_rule(v, world) {
                grants.push(v.id);
            }
        }

        let deciding: Vec<usize> = (0..world.vehicles.len())
            .filter(|&i| {
                let v = &world.vehicles[i];
                v.is_controlled_rv() && v.zone == Zone::ControlZone && !v.entry_granted
            })
            .collect();
        if deciding.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        let policy = policy.ok_or_else(|| Error::InvalidArgument("policy controller active but no policy supplied".into()))?;

        let gt = ground_truth_stats(world);
        let v2v = match self.cfg.stats_source {
            StatsSource::GroundTruth => None,
            StatsSource::V2v => Some(v2v_stats(world, &self.cfg.comm, &mut self.comms_rng)),
        };
        let width = encoded_len(x.mode().directions());
        let footprint = p.footprint();
        let mut data = Vec::with_capacity(deciding.len() * width);
        for &i in &deciding {
            let v = &world.vehicles[i];
            let stats = match &v2v {
                Some(m) => m.get(&v.id).map_or(&gt, |s| s),
                None => &gt,
            };
            let obs = encode_observation(v, stats, world)?;
            data.extend(obs.features(x, footprint));
        }
        let obs = Array2::from_shape_vec((deciding.len(), width), data).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let actions = policy.decide(obs.view())?;
        if actions.len() != deciding.len() {
            return Err(Error::InvalidArgument("policy returned the wrong number of actions".into()));
        }

        let is_candidate: Vec<bool> = deciding.iter().map(|i| window.contains(i)).collect();
        let go_candidates: Vec<StreamId> = deciding
            .iter()
            .zip(&actions)
            .zip(&is_candidate)
            .filter(|((_, a), &c)| c && a.0 == Action::Go)
            .map(|((&i, _), _)| world.vehicles[i].stream)
            .collect();

        let mut candidates = Vec::new();
        let mut conflict = Vec::with_capacity(deciding.len());
        for (k, &i) in deciding.iter().enumerate() {
            let v = &world.vehicles[i];
            let go = actions[k].0 == Action::Go;
            let c = go
                && is_candidate[k]
                && (held_before.iter().any(|&s| x.conflicts(v.stream, s)) || go_candidates.iter().any(|&s| x.conflicts(v.stream, s)));
            conflict.push(c);
            if go && is_candidate[k] {
                let j = direction_index(x, v.stream).expect("active stream");
                candidates.push(Candidate {
                    id: v.id,
                    stream: v.stream,
                    score: priority_score(gt[j].0, gt[j].1, x.lanes(v.stream)),
                });
            }
        }

        let rv_grants = if self.cfg.resolution {
            let granted_now: Vec<StreamId> = grants.iter().filter_map(|id| world.get(*id)).map(|v| v.stream).collect();
            let holds = |s: StreamId| held_before.contains(&s) || granted_now.contains(&s);
            resolve_conflicts(&candidates, holds, x)
        } else {
            candidates.iter().map(|c| c.id).collect()
        };

        let mut out = Vec::with_capacity(deciding.len());
        let mut records = Vec::with_capacity(deciding.len());
        let rows: Vec<Vec<f64>> = obs.rows().into_iter().map(|r| r.to_vec()).collect();
        for (k, &i) in deciding.iter().enumerate() {
            let v = &world.vehicles[i];
            let (action, explored) = actions[k];
            let granted = rv_grants.contains(&v.id);
            let effective = if is_candidate[k] && !granted { Action::Stop } else { action };
            let leader = world.leader_of(i).map(|l| (l.gap, l.v));
            controls.insert(v.id, actuation(effective, v, leader, &p));
            out.push(Decision {
                id: v.id,
                features: rows[k].clone(),
                action,
                reward: 0.0,
                conflict: conflict[k],
            });
            records.push(DecisionRecord {
                id: v.id,
                stream: v.stream,
                action,
                candidate: is_candidate[k],
                conflict: conflict[k],
                granted,
                explored,
                reward: 0.0,
            });
        }
        grants.extend(rv_grants);
        Ok((out, records))
    }

    /// Runs to the horizon.
    pub fn run<'p>(&mut self, mut policy: Option<&mut (dyn Policy + 'p)>) -> Result<()> {
        while !self.done() {
            self.step(policy.as_deref_mut())?;
        }
        Ok(())
    }
}

/// Sorted map from vehicle to its latest pending decision, used to chain
/// decisions into transitions.
pub type Pending = BTreeMap<VehicleId, Decision>;
