//! Centralised training of the shared Stop/Go policy.

use crate::error::Result;
use crate::learn::{LearnConfig, Learner, Transition};
use crate::metrics::{speed_of, still_in_zone, CongestionDetector};
use crate::rng::derived_seed;
use crate::runlog::{RunLog, VehicleRecord};
use crate::sim::{Pending, SimConfig, Simulation};

/// Per-episode training curve point.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Vehicle-seconds spent still in the control zone. Episodes cut short by
    /// congestion are charged as if the final queue stayed frozen until the
    /// episode length.
    pub cumulative_wait: f64,
    pub conflicts: usize,
    pub decisions: usize,
    /// Exploration rate at the end of the episode.
    pub epsilon: f64,
    pub steps: u64,
    pub early_stop: bool,
}

pub struct TrainOutput {
    pub learner: Learner,
    pub curves: Vec<EpochStats>,
    /// Log of the episode requested through `keep_log`, if any.
    pub log: Option<RunLog>,
}

/// Runs `learn.episodes` episodes of the scenario, each with seed
/// `seed + k`, sharing one learner.
pub fn train(sim_cfg: &SimConfig, learn: &LearnConfig, seed: u64, keep_log: Option<usize>, mut on_epoch: impl FnMut(&EpochStats)) -> Result<TrainOutput> {
    learn.validate()?;
    let mut cfg = sim_cfg.clone();
    cfg.horizon = learn.episode_steps;
    cfg.resolution = learn.resolution;
    cfg.controller = crate::control::ControllerKind::Policy;
    let width = Simulation::new(cfg.clone(), seed)?.input_width();
    let mut learner = Learner::new(width, learn.clone(), seed)?;
    let mut curves = Vec::with_capacity(learn.episodes);
    let mut kept = None;

    for epoch in 0..learn.episodes {
        let mut sim = Simulation::new(cfg.clone(), derived_seed(seed, epoch as u64))?;
        sim.record = keep_log == Some(epoch);
        let mut pending = Pending::new();
        let mut detector = CongestionDetector::default();
        let mut wait = 0.0;
        let mut conflicts = 0;
        let mut decisions = 0;
        let mut early_stop = false;
        while !sim.done() {
            let ds = sim.step(Some(&mut learner))?;
            decisions += ds.len();
            conflicts += ds.iter().filter(|d| d.conflict).count();

            // Chain consecutive decisions of one vehicle; vehicles that
            // stopped deciding close their sequence.
            let mut next = Pending::new();
            for d in ds {
                if let Some(prev) = pending.remove(&d.id) {
                    learner.remember(Transition {
                        obs: prev.features,
                        action: prev.action,
                        reward: prev.reward,
                        next_obs: d.features.clone(),
                        discount_next: learn.gamma,
                    });
                }
                next.insert(d.id, d);
            }
            for (_, prev) in std::mem::take(&mut pending) {
                learner.remember(terminal(prev));
            }
            pending = next;
            learner.update()?;

            let snapshot: Vec<VehicleRecord> = sim.world.vehicles.iter().map(VehicleRecord::from).collect();
            wait += still_in_zone(&snapshot) as f64;
            if detector.push(speed_of(&snapshot)) {
                let left = (learn.episode_steps - sim.world.step) as f64;
                wait += left * still_in_zone(&snapshot) as f64;
                early_stop = true;
                break;
            }
        }
        for (_, prev) in pending {
            learner.remember(terminal(prev));
        }
        let stats = EpochStats {
            epoch,
            cumulative_wait: wait,
            conflicts,
            decisions,
            epsilon: learner.epsilon(),
            steps: sim.world.step,
            early_stop,
        };
        on_epoch(&stats);
        curves.push(stats);
        if sim.record {
            kept = Some(std::mem::take(&mut sim.log));
        }
    }
    Ok(TrainOutput {
        learner,
        curves,
        log: kept,
    })
}

fn terminal(d: crate::sim::Decision) -> Transition {
    Transition {
        obs: d.features,
        action: d.action,
        reward: d.reward,
        next_obs: Vec::new(),
        discount_next: 0.0,
    }
}

/// Mean of the first and last quarter of a series.
pub fn quartile_means(xs: &[f64]) -> (f64, f64) {
    let q = (xs.len() / 4).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&xs[..q]), mean(&xs[xs.len() - q..]))
}
