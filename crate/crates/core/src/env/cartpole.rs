//! Cart-pole balancing with the Barto/Sutton/Anderson Euler dynamics.

use rand::{Rng, RngCore};

use super::constants::CartPoleConstants;
use super::{check_action, terminal_step_error, EnvState, Environment, Features, StepOutcome};
use crate::error::Result;

pub const NUM_ACTIONS: usize = 2;
pub const PUSH_LEFT: usize = 0;
pub const PUSH_RIGHT: usize = 1;

pub fn failed(c: &CartPoleConstants, s: &[f64]) -> bool {
    s[0].abs() > c.x_threshold || s[2].abs() > c.theta_threshold
}

/// One Euler step of `[x, ẋ, θ, θ̇]`. Reward 1 for every step that keeps
/// the pole up, 0 on the failing step.
pub fn step(c: &CartPoleConstants, s: [f64; 4], action: usize) -> StepOutcome {
    let [x, x_dot, theta, theta_dot] = s;
    let force = if action == PUSH_RIGHT {
        c.force_mag
    } else {
        -c.force_mag
    };
    let total_mass = c.mass_cart + c.mass_pole;
    let polemass_length = c.mass_pole * c.half_length;
    let (sin, cos) = theta.sin_cos();
    let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
    let theta_acc = (c.gravity * sin - cos * temp)
        / (c.half_length * (4.0 / 3.0 - c.mass_pole * cos * cos / total_mass));
    let x_acc = temp - polemass_length * theta_acc * cos / total_mass;

    let next = [
        x + c.tau * x_dot,
        x_dot + c.tau * x_acc,
        theta + c.tau * theta_dot,
        theta_dot + c.tau * theta_acc,
    ];
    let done = failed(c, &next);
    let next = EnvState::continuous(next.to_vec());
    if done {
        StepOutcome::terminal(next, 0.0)
    } else {
        StepOutcome::continuing(next, 1.0)
    }
}

pub struct CartPole {
    c: CartPoleConstants,
    cutoff: Option<usize>,
    state: EnvState,
}

impl CartPole {
    pub fn new(c: CartPoleConstants, cutoff: Option<usize>) -> Self {
        Self {
            c,
            cutoff,
            state: EnvState::continuous(vec![0.0; 4]),
        }
    }
}

impl Environment for CartPole {
    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn feature_dim(&self) -> usize {
        4
    }

    fn cutoff(&self) -> Option<usize> {
        self.cutoff
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvState {
        let r = self.c.start_range;
        let s = (0..4).map(|_| rng.gen_range(-r..r)).collect();
        self.state = EnvState::continuous(s);
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
        let outcome = step(&self.c, [s[0], s[1], s[2], s[3]], action);
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }

    fn features(&self, state: &EnvState) -> Features {
        Features::Dense(state.vector().expect("continuous").to_vec())
    }
}
