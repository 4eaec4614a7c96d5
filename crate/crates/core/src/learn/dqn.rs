//! Double-DQN loss, ε-greedy action selection and the learner state.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::network::{grad_norm, Grads, Mlp, SgdMomentum};
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng, Substream};
use crate::vehicle::Action;

pub const HIDDEN: [usize; 3] = [512, 512, 512];

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub priority_alpha: f64,
    pub is_beta_start: f64,
    pub is_beta_end: f64,
    /// Updates over which β anneals linearly to its end value.
    pub is_beta_updates: u64,
    pub target_sync_every: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Decisions over which ε decays linearly.
    pub epsilon_decay: u64,
    pub warmup: usize,
    pub grad_clip: f64,
    pub episodes: usize,
    /// Steps per training episode.
    pub episode_steps: u64,
    /// Use the conflict-resolution gate while training.
    pub resolution: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            gamma: 0.99,
            lr: 5e-4,
            momentum: 0.9,
            batch: 32,
            buffer_capacity: 50_000,
            priority_alpha: 0.5,
            is_beta_start: 0.4,
            is_beta_end: 1.0,
            is_beta_updates: 20_000,
            target_sync_every: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 50_000,
            warmup: 1_000,
            grad_clip: 10.0,
            episodes: 20,
            episode_steps: 1_000,
            resolution: true,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.lr > 0.0) || self.batch == 0 || self.buffer_capacity < self.batch {
            return bad("lr, batch and buffer capacity must be positive with capacity ≥ batch");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon values must lie in [0, 1]");
        }
        if self.target_sync_every == 0 || self.episodes == 0 || self.episode_steps == 0 {
            return bad("target sync period, episodes and episode steps must be positive");
        }
        Ok(())
    }

    pub fn epsilon(&self, decisions: u64) -> f64 {
        if self.epsilon_decay == 0 {
            return self.epsilon_end;
        }
        let f = (decisions as f64 / self.epsilon_decay as f64).min(1.0);
        self.epsilon_start * (1.0 - f) + self.epsilon_end * f
    }

    pub fn beta(&self, updates: u64) -> f64 {
        if self.is_beta_updates == 0 {
            return self.is_beta_end;
        }
        let f = (updates as f64 / self.is_beta_updates as f64).min(1.0);
        self.is_beta_start * (1.0 - f) + self.is_beta_end * f
    }
}

pub fn network_dims(input: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend(HIDDEN);
    d.push(2);
    d
}

/// Greedy action; exact ties go to Stop.
pub fn greedy(q: &[f64]) -> Action {
    if q[1] > q[0] {
        Action::Go
    } else {
        Action::Stop
    }
}

/// ε-greedy choice; returns the action and whether it was random.
pub fn act<R: Rng>(q: &[f64], epsilon: f64, rng: &mut R) -> (Action, bool) {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        (Action::from_index(rng.random_range(0..2)), true)
    } else {
        (greedy(q), false)
    }
}

pub struct LossOutput {
    pub loss: f64,
    pub grads: Grads,
    pub td_errors: Vec<f64>,
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        if r.len() != width {
            return Err(Error::InputWidth { expected: width, got: r.len() });
        }
        data.extend(r);
        n += 1;
    }
    Array2::from_shape_vec((n, width), data).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Importance-weighted mean squared double-DQN error and its gradient with
/// respect to the online parameters. The online net picks the next action,
/// the target net evaluates it.
pub fn td_loss(batch: &[&Transition], weights: &[f64], online: &Mlp, target: &Mlp) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let width = online.input_width();
    let obs = stack(batch.iter().map(|t| t.obs.clone()), width)?;
    let next = stack(
        batch.iter().map(|t| if t.next_obs.is_empty() { vec![0.0; width] } else { t.next_obs.clone() }),
        width,
    )?;
    let (q, cache) = online.forward_cached(obs.view())?;
    let q_next_online = online.forward_batch(next.view())?;
    let q_next_target = target.forward_batch(next.view())?;
    let n = batch.len() as f64;
    let mut d_out = Array2::zeros(q.raw_dim());
    let mut td_errors = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let a_next = greedy(&[q_next_online[[i, 0]], q_next_online[[i, 1]]]).index();
        let y = t.reward + t.discount_next * q_next_target[[i, a_next]];
        let a = t.action.index();
        let delta = y - q[[i, a]];
        let w = weights.get(i).copied().unwrap_or(1.0);
        loss += w * delta * delta / n;
        d_out[[i, a]] = -2.0 * w * delta / n;
        td_errors.push(delta);
    }
    let grads = online.backward(&cache, d_out);
    Ok(LossOutput { loss, grads, td_errors })
}

/// Online/target networks, optimiser, replay and schedules.
pub struct Learner {
    pub cfg: LearnConfig,
    pub online: Mlp,
    pub target: Mlp,
    opt: SgdMomentum,
    pub buffer: ReplayBuffer,
    pub updates: u64,
    pub decisions: u64,
    explore_rng: SimRng,
    replay_rng: SimRng,
}

impl Learner {
    pub fn new(input: usize, cfg: LearnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let online = Mlp::new(&network_dims(input), &mut substream(seed, Substream::NetInit));
        let target = online.clone();
        let opt = SgdMomentum::new(&online, cfg.lr, cfg.momentum);
        let buffer = ReplayBuffer::new(cfg.buffer_capacity, cfg.priority_alpha);
        Ok(Learner {
            cfg,
            online,
            target,
            opt,
            buffer,
            updates: 0,
            decisions: 0,
            explore_rng: substream(seed, Substream::Exploration),
            replay_rng: substream(seed, Substream::Replay),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon(self.decisions)
    }

    /// ε-greedy actions for a batch of observations (rows).
    pub fn act_batch(&mut self, obs: ArrayView2<f64>) -> Result<Vec<(Action, bool)>> {
        let q = self.online.forward_batch(obs)?;
        let mut out = Vec::with_capacity(q.nrows());
        for row in q.rows() {
            let eps = self.epsilon();
            out.push(act(&[row[0], row[1]], eps, &mut self.explore_rng));
            self.decisions += 1;
        }
        Ok(out)
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One prioritized gradient step once the buffer holds the warmup amount.
    /// Returns the loss when an update happened.
    pub fn update(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.warmup.max(self.cfg.batch) {
            return Ok(None);
        }
        let beta = self.cfg.beta(self.updates);
        let sample = self.buffer.sample(self.cfg.batch, beta, &mut self.replay_rng)?;
        let batch: Vec<&Transition> = sample.indices.iter().map(|&i| self.buffer.get(i)).collect();
        let mut out = td_loss(&batch, &sample.weights, &self.online, &self.target)?;
        let norm = grad_norm(&out.grads);
        if norm > self.cfg.grad_clip {
            let k = self.cfg.grad_clip / norm;
            for g in &mut out.grads {
                g.w *= k;
                g.b *= k;
            }
        }
        self.opt.step(&mut self.online, &out.grads);
        self.buffer.update_priorities(&sample.indices, &out.td_errors);
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.target_sync_every) {
            self.target.copy_from(&self.online);
        }
        Ok(Some(out.loss))
    }
}

#[cfg(test)]
mod tests {
    use super::super::network::Dense;
    use super::*;
    use ndarray::array;

    fn linear(w: [[f64; 1]; 2], b: [f64; 2]) -> Mlp {
        Mlp {
            layers: vec![Dense {
                w: array![[w[0][0]], [w[1][0]]],
                b: array![b[0], b[1]],
            }],
        }
    }

    fn tr(obs: f64, action: Action, reward: f64, next: f64, discount: f64) -> Transition {
        Transition {
            obs: vec![obs],
            action,
            reward,
            next_obs: vec![next],
            discount_next: discount,
        }
    }

    #[test]
    fn terminal_sample_loss() {
        let net = linear([[0.0], [0.0]], [0.0, 0.5]);
        let t = tr(1.0, Action::Go, 1.0, 1.0, 0.0);
        let out = td_loss(&[&t], &[1.0], &net, &net).unwrap();
        assert!((out.loss - 0.25).abs() < 1e-12);
    }

    #[test]
    fn consistent_values_give_zero_loss() {
        // q(o′) = (1, 2) for both nets; q(o, Go) = 1.98 = 0.99·2.
        let net = Mlp {
            layers: vec![Dense { w: array![[0.0], [0.0]], b: array![1.0, 2.0] }],
        };
        let mut online = net.clone();
        online.layers[0].w = array![[0.0], [-0.02]];
        let t = tr(1.0, Action::Go, 0.0, 0.0, 0.99);
        let out = td_loss(&[&t], &[1.0], &online, &net).unwrap();
        assert!(out.loss < 1e-24, "{}", out.loss);
    }

    #[test]
    fn target_evaluates_online_argmax() {
        // Online prefers Go at o′ (input 0 → biases), target prefers Stop.
        let online = linear([[0.0], [0.0]], [0.0, 1.0]);
        let target = linear([[0.0], [0.0]], [5.0, -3.0]);
        let t = tr(0.0, Action::Stop, 0.0, 0.0, 0.5);
        let out = td_loss(&[&t], &[1.0], &online, &target).unwrap();
        // y = 0.5·q_target(o′, Go) = −1.5; q_online(o, Stop) = 0.
        assert!((out.td_errors[0] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn action_selection() {
        let mut rng = substream(0, Substream::Exploration);
        assert_eq!(act(&[0.2, 0.7], 0.0, &mut rng), (Action::Go, false));
        assert_eq!(act(&[0.5, 0.5], 0.0, &mut rng), (Action::Stop, false));
        let n = 20_000;
        let go = (0..n).filter(|_| act(&[1.0, 0.0], 1.0, &mut rng).0 == Action::Go).count() as f64;
        assert!((go - 10_000.0).abs() < 3.0 * (n as f64 * 0.25).sqrt());
    }

    #[test]
    fn schedules() {
        let c = LearnConfig::default();
        assert_eq!(c.epsilon(0), 1.0);
        assert!((c.epsilon(25_000) - 0.525).abs() < 1e-12);
        assert_eq!(c.epsilon(1_000_000), 0.05);
        assert_eq!(c.beta(0), 0.4);
        assert_eq!(c.beta(1 << 40), 1.0);
    }

    #[test]
    fn target_moves_only_on_sync() {
        let cfg = LearnConfig {
            warmup: 4,
            batch: 4,
            buffer_capacity: 16,
            target_sync_every: 3,
            ..LearnConfig::default()
        };
        let mut l = Learner::new(3, cfg, 1).unwrap();
        for k in 0..8 {
            l.remember(Transition {
                obs: vec![k as f64, 1.0, 0.0],
                action: Action::from_index(k % 2),
                reward: 1.0,
                next_obs: vec![0.0, 0.0, 1.0],
                discount_next: 0.99,
            });
        }
        let t0 = l.target.clone();
        l.update().unwrap();
        l.update().unwrap();
        assert_eq!(l.target, t0);
        assert_ne!(l.online, t0);
        l.update().unwrap();
        assert_eq!(l.target, l.online);
    }
}
