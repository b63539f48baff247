//! Replay-buffer variants (uniform, naive proportional, DM-style prioritized,
//! expected-TD-error prioritized), tabular and neural value learners, five
//! small benchmark environments, and a seeded experiment harness.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: chain, cliffworld, mountain car, acrobot, cart-pole, a noisy
//!   terminal-reward wrapper and exact dynamic-programming oracles.
//! - [`replay`]: FIFO buffer over a sum tree with the four sampling regimes.
//! - [`approx`]: lookup tables, a two-hidden-layer ReLU MLP and Adam.
//! - [`agents`]: TD(0) prediction, tabular Q-learning and DQN wired to the
//!   buffers, including the expected-TD-error estimator.
//! - [`metrics`]: MSVE, steps-to-goal, bootstrap intervals and heatmaps.
//! - [`harness`]: configs, presets, runs, sweeps and two-stage selection.
//! - [`io`]: plot-ready result files and directory aggregation.

pub mod agents;
pub mod approx;
pub mod env;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
