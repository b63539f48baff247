//! Mountain car with the standard Moore dynamics.

use rand::{Rng, RngCore};

use super::constants::MountainCarConstants;
use super::{check_action, terminal_step_error, EnvState, Environment, Features, StepOutcome};
use crate::error::Result;

pub const NUM_ACTIONS: usize = 3;

/// One transition from `[position, velocity]` with throttle `action` in
/// {0: left, 1: coast, 2: right}. Reward is -1 per step and 0 on reaching
/// the goal.
pub fn step(c: &MountainCarConstants, state: [f64; 2], action: usize) -> StepOutcome {
    let [x, v] = state;
    let mut v = v + (action as f64 - 1.0) * c.force - c.gravity * (3.0 * x).cos();
    v = v.clamp(-c.max_speed, c.max_speed);
    let mut x = x + v;
    x = x.clamp(c.min_position, c.max_position);
    if x == c.min_position && v < 0.0 {
        v = 0.0;
    }
    let next = EnvState::continuous(vec![x, v]);
    if x >= c.goal_position {
        StepOutcome::terminal(next, 0.0)
    } else {
        StepOutcome::continuing(next, -1.0)
    }
}

pub fn in_bounds(c: &MountainCarConstants, s: &[f64]) -> bool {
    s.len() == 2
        && (c.min_position..=c.max_position).contains(&s[0])
        && (-c.max_speed..=c.max_speed).contains(&s[1])
}

pub struct MountainCar {
    c: MountainCarConstants,
    cutoff: Option<usize>,
    state: EnvState,
}

impl MountainCar {
    pub fn new(c: MountainCarConstants, cutoff: Option<usize>) -> Self {
        Self {
            c,
            cutoff,
            state: EnvState::continuous(vec![-0.5, 0.0]),
        }
    }
}

impl Environment for MountainCar {
    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn cutoff(&self) -> Option<usize> {
        self.cutoff
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvState {
        let x = rng.gen_range(self.c.start_low..self.c.start_high);
        self.state = EnvState::continuous(vec![x, 0.0]);
        self.state.clone()
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_action(action, NUM_ACTIONS)?;
        if self.state.terminal {
            return Err(terminal_step_error());
        }
        let s = self.state.vector().expect("continuous");
        let outcome = step(&self.c, [s[0], s[1]], action);
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }

    /// Position and velocity rescaled to roughly [-1, 1].
    fn features(&self, state: &EnvState) -> Features {
        let s = state.vector().expect("continuous");
        let mid = 0.5 * (self.c.max_position + self.c.min_position);
        let half = 0.5 * (self.c.max_position - self.c.min_position);
        Features::Dense(vec![(s[0] - mid) / half, s[1] / self.c.max_speed])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{PhysicsConstants, GAMMA};

    fn consts() -> MountainCarConstants {
        PhysicsConstants::builtin().mountaincar
    }

    #[test]
    fn right_throttle_from_rest() {
        let out = step(&consts(), [-0.5, 0.0], 2);
        // Direct evaluation of v' = 0.001 - 0.0025 cos(-1.5), x' = -0.5 + v'.
        let v = 0.001 - 0.0025 * (-1.5f64).cos();
        let s = out.next_state.vector().unwrap();
        assert_eq!(s[1], v);
        assert_eq!(s[0], -0.5 + v);
        assert!((s[0] - (-0.4991768)).abs() < 1e-7);
        assert!((s[1] - 0.0008231).abs() < 1e-7);
        assert_eq!(out.reward, -1.0);
        assert_eq!(out.discount, GAMMA);
    }

    #[test]
    fn coasting_past_goal_terminates() {
        let out = step(&consts(), [0.49, 0.02], 1);
        assert!(out.next_state.terminal);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.discount, 0.0);
    }

    #[test]
    fn left_wall_zeroes_velocity() {
        let out = step(&consts(), [-1.2, -0.05], 0);
        let s = out.next_state.vector().unwrap();
        assert!(s[0] >= -1.2);
        assert_eq!(s[1], 0.0);
        assert!(!out.next_state.terminal);
    }
}
