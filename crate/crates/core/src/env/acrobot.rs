//! Two-link acrobot (Sutton 1996 "book" dynamics), one RK4 step of `dt` per
//! action.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::constants::AcrobotConstants;
use super::{check_action, terminal_step_error, EnvState, Environment, Features, StepOutcome};
use crate::error::Result;

pub const NUM_ACTIONS: usize = 3;

/// Torque applied for action index `a` in {0, 1, 2}.
pub fn torque(action: usize) -> f64 {
    action as f64 - 1.0
}

/// Time derivative of `[θ1, θ2, θ̇1, θ̇2]` under constant `torque`.
pub fn derivatives(c: &AcrobotConstants, s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2) = (c.link_mass_1, c.link_mass_2);
    let l1 = c.link_length_1;
    let (lc1, lc2) = (c.link_com_pos_1, c.link_com_pos_2);
    let (i1, i2) = (c.link_moi, c.link_moi);
    let g = c.gravity;
    let [theta1, theta2, dtheta1, dtheta2] = s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    // cos(x - pi/2) written as sin(x) so the hanging rest state is an exact
    // fixed point.
    let phi2 = m2 * lc2 * g * (theta1 + theta2).sin();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * theta1.sin()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin()
        - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4(c: &AcrobotConstants, s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], k: [f64; 4], h: f64| -> [f64; 4] {
        [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]]
    };
    let k1 = derivatives(c, s, torque);
    let k2 = derivatives(c, add(s, k1, dt / 2.0), torque);
    let k3 = derivatives(c, add(s, k2, dt / 2.0), torque);
    let k4 = derivatives(c, add(s, k3, dt), torque);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Wraps an angle into [-pi, pi].
pub fn wrap(mut x: f64) -> f64 {
    let diff = 2.0 * PI;
    while x > PI {
        x -= diff;
    }
    while x < -PI {
        x += diff;
    }
    x
}

pub fn tip_height(s: &[f64]) -> f64 {
    -s[0].cos() - (s[0] + s[1]).cos()
}

pub fn is_terminal(s: &[f64]) -> bool {
    tip_height(s) > 1.0
}

/// Integrates one step and applies angle wrapping and velocity bounds.
/// Reward is -1 per step and 0 on the terminating step.
pub fn step(c: &AcrobotConstants, s: [f64; 4], action: usize) -> StepOutcome {
    let n = rk4(c, s, torque(action), c.dt);
    let next = vec![
        wrap(n[0]),
        wrap(n[1]),
        n[2].clamp(-c.max_vel_1, c.max_vel_1),
        n[3].clamp(-c.max_vel_2, c.max_vel_2),
    ];
    let terminal = is_terminal(&next);
    let next = EnvState::continuous(next);
    if terminal {
        StepOutcome::terminal(next, 0.0)
    } else {
        StepOutcome::continuing(next, -1.0)
    }
}

pub fn in_bounds(c: &AcrobotConstants, s: &[f64]) -> bool {
    s.len() == 4
        && (-PI..=PI).contains(&s[0])
        && (-PI..=PI).contains(&s[1])
        && (-c.max_vel_1..=c.max_vel_1).contains(&s[2])
        && (-c.max_vel_2..=c.max_vel_2).contains(&s[3])
}

pub struct Acrobot {
    c: AcrobotConstants,
    cutoff: Option<usize>,
    state: EnvState,
}

impl Acrobot {
    pub fn new(c: AcrobotConstants, cutoff: Option<usize>) -> Self {
        Self {
            c,
            cutoff,
            state: EnvState::continuous(vec![0.0; 4]),
        }
    }
}

impl Environment for Acrobot {
    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn feature_dim(&self) -> usize {
        6
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

    /// `[cos θ1, sin θ1, cos θ2, sin θ2, θ̇1 / max1, θ̇2 / max2]`.
    fn features(&self, state: &EnvState) -> Features {
        let s = state.vector().expect("continuous");
        Features::Dense(vec![
            s[0].cos(),
            s[0].sin(),
            s[1].cos(),
            s[1].sin(),
            s[2] / self.c.max_vel_1,
            s[3] / self.c.max_vel_2,
        ])
    }
}
