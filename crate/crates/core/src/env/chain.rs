//! 50-state chain: start at the left end, move left/right, +1 and terminate
//! when stepping right off the right end. Left at the left end is a
//! self-loop.

use rand::RngCore;

use super::{
    check_action, terminal_step_error, ChainEncoding, EnvState, Environment, Features,
    StepOutcome,
};
use crate::error::Result;

pub const NUM_STATES: usize = 50;
pub const START: usize = 0;
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Index given to the absorbing state past the right end.
pub const TERMINAL_INDEX: usize = NUM_STATES;

/// Deterministic chain transition from a non-terminal state.
pub fn step(state: usize, action: usize) -> StepOutcome {
    debug_assert!(state < NUM_STATES && action <= RIGHT);
    match action {
        LEFT => StepOutcome::continuing(EnvState::discrete(state.saturating_sub(1)), 0.0),
        _ if state + 1 == NUM_STATES => {
            StepOutcome::terminal(EnvState::discrete(TERMINAL_INDEX), 1.0)
        }
        _ => StepOutcome::continuing(EnvState::discrete(state + 1), 0.0),
    }
}

pub fn encode(index: usize, encoding: ChainEncoding) -> Features {
    match encoding {
        ChainEncoding::OneHot => Features::Index(index),
        ChainEncoding::Scalar => Features::Dense(vec![index as f64 / (NUM_STATES - 1) as f64]),
    }
}

pub struct Chain {
    state: EnvState,
    encoding: ChainEncoding,
}

impl Chain {
    pub fn new(encoding: ChainEncoding) -> Self {
        Self {
            state: EnvState::discrete(START),
            encoding,
        }
    }
}

impl Environment for Chain {
    fn num_actions(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        match self.encoding {
            ChainEncoding::OneHot => NUM_STATES,
            ChainEncoding::Scalar => 1,
        }
    }

    fn num_states(&self) -> Option<usize> {
        Some(NUM_STATES)
    }

    fn cutoff(&self) -> Option<usize> {
        None
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> EnvState {
        self.state = EnvState::discrete(START);
        self.state.clone()
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_action(action, 2)?;
        if self.state.terminal {
            return Err(terminal_step_error());
        }
        let index = self.state.index().expect("chain state is discrete");
        let outcome = step(index, action);
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }

    fn features(&self, state: &EnvState) -> Features {
        encode(state.index().expect("chain state is discrete"), self.encoding)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GAMMA;
    use rand::{Rng, SeedableRng};

    #[test]
    fn right_from_last_state_terminates() {
        let out = step(49, RIGHT);
        assert!(out.next_state.terminal);
        assert_eq!(out.reward, 1.0);
        assert_eq!(out.discount, 0.0);
    }

    #[test]
    fn left_from_first_state_self_loops() {
        let out = step(0, LEFT);
        assert_eq!(out.next_state, EnvState::discrete(0));
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.discount, GAMMA);
    }

    #[test]
    fn interior_moves_to_neighbour() {
        let out = step(10, RIGHT);
        assert_eq!(out.next_state, EnvState::discrete(11));
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.discount, GAMMA);
    }

    #[test]
    fn stepping_terminal_is_an_error() {
        let mut rng = rand::rngs::SmallRng::seed_from_u64(0);
        let mut env = Chain::new(ChainEncoding::OneHot);
        for _ in 0..NUM_STATES {
            env.step(RIGHT, &mut rng).unwrap();
        }
        assert!(env.state().terminal);
        assert!(env.step(RIGHT, &mut rng).is_err());
    }

    #[test]
    fn every_episode_returns_exactly_one() {
        let mut rng = rand::rngs::SmallRng::seed_from_u64(11);
        let mut env = Chain::new(ChainEncoding::OneHot);
        for _ in 0..20 {
            env.reset(&mut rng);
            let mut total = 0.0;
            loop {
                let out = env.step(rng.gen_range(0..2), &mut rng).unwrap();
                total += out.reward;
                assert_eq!(out.discount == 0.0, out.next_state.terminal);
                if out.next_state.terminal {
                    break;
                }
            }
            assert_eq!(total, 1.0);
        }
    }
}
