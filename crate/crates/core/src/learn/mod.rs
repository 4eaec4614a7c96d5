//! Value-based learning: reward, value network, prioritized replay, the
//! double-DQN learner and checkpoints.

pub mod checkpoint;
pub mod dqn;
pub mod network;
pub mod replay;
pub mod reward;

pub use dqn::{act, greedy, network_dims, td_loss, LearnConfig, Learner};
pub use network::Mlp;
pub use replay::{ReplayBuffer, Transition};
pub use reward::{reward, RewardParams};
