//! Conflict-aware per-decision reward.

use crate::perception::W_MAX;
use crate::vehicle::Action;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub lambda_l: f64,
    pub w_max: f64,
    pub conflict_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            lambda_l: 1.0,
            w_max: W_MAX,
            conflict_penalty: -1.0,
        }
    }
}

/// Local term: the normalised waiting time of the RV's own direction, negated
/// for Stop and kept positive for Go.
pub fn local_reward(action: Action, own_w_next: f64, p: &RewardParams) -> f64 {
    let w = (own_w_next / p.w_max).clamp(0.0, 1.0);
    match action {
        Action::Stop => -w,
        Action::Go => w,
    }
}

pub fn reward(action: Action, own_w_next: f64, conflict: bool, p: &RewardParams) -> f64 {
    let pc = if conflict { p.conflict_penalty } else { 0.0 };
    p.lambda_l * local_reward(action, own_w_next, p) + pc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        let p = RewardParams::default();
        assert_eq!(reward(Action::Stop, 200.0, false, &p), -1.0);
        assert_eq!(reward(Action::Go, 100.0, true, &p), -0.5);
        assert_eq!(reward(Action::Go, 0.0, false, &p), 0.0);
        assert_eq!(reward(Action::Go, 1e6, false, &p), 1.0);
        assert_eq!(reward(Action::Stop, 1e6, true, &p), -2.0);
    }
}
