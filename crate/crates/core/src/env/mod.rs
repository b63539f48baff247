//! Benchmark environments and their exact oracles.
//!
//! Every environment is a small single-threaded state machine. The pure
//! transition functions (`chain::step`, `mountaincar::step`, ...) carry the
//! dynamics; the [`Environment`] implementations add episode bookkeeping,
//! start-state sampling and feature encoding for the learners.

pub mod acrobot;
pub mod cartpole;
pub mod chain;
pub mod cliffworld;
pub mod constants;
pub mod mountaincar;
pub mod noise;
pub mod oracle;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub use constants::PhysicsConstants;
pub use noise::{NoiseSpec, NoisyTerminal};

/// Discount applied on every non-terminal transition.
pub const GAMMA: f64 = 0.99;

/// Raw environment observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observation {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub obs: Observation,
    pub terminal: bool,
}

impl EnvState {
    pub fn discrete(index: usize) -> Self {
        Self {
            obs: Observation::Discrete(index),
            terminal: false,
        }
    }

    pub fn continuous(values: Vec<f64>) -> Self {
        Self {
            obs: Observation::Continuous(values),
            terminal: false,
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self.obs {
            Observation::Discrete(i) => Some(i),
            Observation::Continuous(_) => None,
        }
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match &self.obs {
            Observation::Continuous(v) => Some(v),
            Observation::Discrete(_) => None,
        }
    }
}

/// Result of a single environment transition.
///
/// `discount` is 0 exactly on true termination and [`GAMMA`] otherwise.
/// Episode cutoffs are reported by [`Episode`], never through `discount`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub discount: f64,
}

impl StepOutcome {
    pub(crate) fn continuing(next_state: EnvState, reward: f64) -> Self {
        Self {
            next_state,
            reward,
            discount: GAMMA,
        }
    }

    pub(crate) fn terminal(mut next_state: EnvState, reward: f64) -> Self {
        next_state.terminal = true;
        Self {
            next_state,
            reward,
            discount: 0.0,
        }
    }
}

/// Learner-facing encoding of a state.
///
/// `Index` doubles as a one-hot vector for neural networks and as a table
/// key for tabular learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Features {
    Index(usize),
    Dense(Vec<f64>),
}

impl Features {
    pub fn index(&self) -> Option<usize> {
        match self {
            Features::Index(i) => Some(*i),
            Features::Dense(_) => None,
        }
    }
}

pub trait Environment {
    fn num_actions(&self) -> usize;

    /// Width of the feature vector handed to neural networks
    /// (for `Features::Index` this is the one-hot width).
    fn feature_dim(&self) -> usize;

    /// Number of distinct discrete states, if the state space is finite.
    fn num_states(&self) -> Option<usize> {
        None
    }

    /// Episode cutoff length, if any.
    fn cutoff(&self) -> Option<usize>;

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvState;

    fn state(&self) -> &EnvState;

    /// Advances the environment. Stepping a terminal state is an error;
    /// call [`Environment::reset`] first.
    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<StepOutcome>;

    fn features(&self, state: &EnvState) -> Features;
}

pub(crate) fn check_action(action: usize, n: usize) -> Result<()> {
    if action >= n {
        return Err(Error::Env(format!("action {action} out of range 0..{n}")));
    }
    Ok(())
}

pub(crate) fn terminal_step_error() -> Error {
    Error::Env("step called on a terminal state; reset first".into())
}

/// Encoding of chain states for neural networks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainEncoding {
    /// One-hot over the 50 states.
    #[default]
    OneHot,
    /// Single scalar in [0, 1] proportional to the state index.
    Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Chain,
    Cliffworld,
    Mountaincar,
    Acrobot,
    Cartpole,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Chain => "chain",
            EnvKind::Cliffworld => "cliffworld",
            EnvKind::Mountaincar => "mountaincar",
            EnvKind::Acrobot => "acrobot",
            EnvKind::Cartpole => "cartpole",
        }
    }
}

/// Declarative environment selection as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    #[serde(default)]
    pub chain_encoding: ChainEncoding,
    /// Overrides the default cutoff (500 for the classic-control tasks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            kind,
            chain_encoding: ChainEncoding::default(),
            cutoff: None,
            noise: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(noise) = &self.noise {
            noise
                .validate()
                .map_err(|e| Error::config("env.noise", e.to_string()))?;
        }
        if self.cutoff == Some(0) {
            return Err(Error::config("env.cutoff", "must be positive"));
        }
        Ok(())
    }

    /// Builds the environment; `noise_rng` is only consumed by the noisy
    /// wrapper.
    pub fn build(
        &self,
        constants: &PhysicsConstants,
        noise_rng: StreamRng,
    ) -> Result<Box<dyn Environment + Send>> {
        self.validate()?;
        let default_cutoff = constants.episode_cutoff;
        let base: Box<dyn Environment + Send> = match self.kind {
            EnvKind::Chain => Box::new(chain::Chain::new(self.chain_encoding)),
            EnvKind::Cliffworld => Box::new(cliffworld::Cliffworld::new()),
            EnvKind::Mountaincar => Box::new(mountaincar::MountainCar::new(
                constants.mountaincar,
                Some(self.cutoff.unwrap_or(default_cutoff)),
            )),
            EnvKind::Acrobot => Box::new(acrobot::Acrobot::new(
                constants.acrobot,
                Some(self.cutoff.unwrap_or(default_cutoff)),
            )),
            EnvKind::Cartpole => Box::new(cartpole::CartPole::new(
                constants.cartpole,
                Some(self.cutoff.unwrap_or(default_cutoff)),
            )),
        };
        Ok(match &self.noise {
            Some(noise) if !noise.is_identity() => {
                Box::new(NoisyTerminal::new(base, *noise, noise_rng)?)
            }
            _ => base,
        })
    }
}

/// Why an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpisodeEnd {
    Terminated,
    Truncated,
}

/// Tracks episode length and return on top of an [`Environment`], applying
/// the cutoff and resetting automatically.
pub struct Episode {
    env: Box<dyn Environment + Send>,
    steps: usize,
    ret: f64,
}

/// One step as seen by a learner.
#[derive(Clone, Debug)]
pub struct EpisodeStep {
    pub state: EnvState,
    pub action: usize,
    pub outcome: StepOutcome,
    /// Set when this step ended the episode; carries the final length and
    /// return.
    pub ended: Option<(EpisodeEnd, usize, f64)>,
}

impl Episode {
    pub fn new(mut env: Box<dyn Environment + Send>, rng: &mut dyn RngCore) -> Self {
        env.reset(rng);
        Self {
            env,
            steps: 0,
            ret: 0.0,
        }
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn state(&self) -> &EnvState {
        self.env.state()
    }

    pub fn current_return(&self) -> f64 {
        self.ret
    }

    pub fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<EpisodeStep> {
        let state = self.env.state().clone();
        let outcome = self.env.step(action, rng)?;
        self.steps += 1;
        self.ret += outcome.reward;
        let ended = if outcome.next_state.terminal {
            Some(EpisodeEnd::Terminated)
        } else if self.env.cutoff().is_some_and(|c| self.steps >= c) {
            Some(EpisodeEnd::Truncated)
        } else {
            None
        };
        let ended = ended.map(|end| {
            let summary = (end, self.steps, self.ret);
            self.env.reset(rng);
            self.steps = 0;
            self.ret = 0.0;
            summary
        });
        Ok(EpisodeStep {
            state,
            action,
            outcome,
            ended,
        })
    }
}
