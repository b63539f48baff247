//! 4x12 cliff-walking gridworld. Cells are indexed row-major from the top
//! left; the agent starts bottom-left, the goal is bottom-right and the ten
//! cells between them are the cliff. Falling off costs -100 and teleports
//! back to the start without ending the episode.

use rand::RngCore;

use super::{check_action, terminal_step_error, EnvState, Environment, Features, StepOutcome};
use crate::error::Result;

pub const ROWS: usize = 4;
pub const COLS: usize = 12;
pub const NUM_STATES: usize = ROWS * COLS;
pub const START: usize = (ROWS - 1) * COLS;
pub const GOAL: usize = ROWS * COLS - 1;

pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;
pub const NUM_ACTIONS: usize = 4;

pub const STEP_REWARD: f64 = -1.0;
pub const CLIFF_REWARD: f64 = -100.0;

pub fn is_cliff(cell: usize) -> bool {
    cell / COLS == ROWS - 1 && cell != START && cell != GOAL
}

pub fn step(cell: usize, action: usize) -> StepOutcome {
    debug_assert!(cell < NUM_STATES && action < NUM_ACTIONS);
    let (row, col) = (cell / COLS, cell % COLS);
    let (row, col) = match action {
        UP => (row.saturating_sub(1), col),
        DOWN => ((row + 1).min(ROWS - 1), col),
        LEFT => (row, col.saturating_sub(1)),
        _ => (row, (col + 1).min(COLS - 1)),
    };
    let next = row * COLS + col;
    if is_cliff(next) {
        StepOutcome::continuing(EnvState::discrete(START), CLIFF_REWARD)
    } else if next == GOAL {
        StepOutcome::terminal(EnvState::discrete(GOAL), STEP_REWARD)
    } else {
        StepOutcome::continuing(EnvState::discrete(next), STEP_REWARD)
    }
}

#[derive(Default)]
pub struct Cliffworld {
    state: Option<EnvState>,
}

impl Cliffworld {
    pub fn new() -> Self {
        Self {
            state: Some(EnvState::discrete(START)),
        }
    }
}

impl Environment for Cliffworld {
    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn feature_dim(&self) -> usize {
        NUM_STATES
    }

    fn num_states(&self) -> Option<usize> {
        Some(NUM_STATES)
    }

    fn cutoff(&self) -> Option<usize> {
        None
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> EnvState {
        let s = EnvState::discrete(START);
        self.state = Some(s.clone());
        s
    }

    fn state(&self) -> &EnvState {
        self.state.as_ref().expect("cliffworld initialised")
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_action(action, NUM_ACTIONS)?;
        let state = self.state();
        if state.terminal {
            return Err(terminal_step_error());
        }
        let outcome = step(state.index().expect("discrete"), action);
        self.state = Some(outcome.next_state.clone());
        Ok(outcome)
    }

    fn features(&self, state: &EnvState) -> Features {
        Features::Index(state.index().expect("discrete"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GAMMA;

    #[test]
    fn right_from_start_falls_off() {
        let out = step(START, RIGHT);
        assert_eq!(out.next_state, EnvState::discrete(START));
        assert_eq!(out.reward, -100.0);
        assert_eq!(out.discount, GAMMA);
    }

    #[test]
    fn up_from_start_moves_up() {
        let out = step(START, UP);
        assert_eq!(out.next_state, EnvState::discrete(START - COLS));
        assert_eq!(out.reward, -1.0);
        assert_eq!(out.discount, GAMMA);
    }

    #[test]
    fn down_into_goal_terminates() {
        let out = step(GOAL - COLS, DOWN);
        assert!(out.next_state.terminal);
        assert_eq!(out.reward, -1.0);
        assert_eq!(out.discount, 0.0);
    }

    #[test]
    fn walls_clip_movement() {
        assert_eq!(step(0, UP).next_state.index(), Some(0));
        assert_eq!(step(0, LEFT).next_state.index(), Some(0));
        assert_eq!(step(COLS - 1, RIGHT).next_state.index(), Some(COLS - 1));
        assert_eq!(step(START, DOWN).next_state.index(), Some(START));
    }

    #[test]
    fn ten_cliff_cells() {
        assert_eq!((0..NUM_STATES).filter(|&c| is_cliff(c)).count(), 10);
    }
}
