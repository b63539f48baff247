//! TD(0) prediction, tabular Q-learning and DQN over a replay buffer, with
//! Uniform, Naive PER, DM-PER and EPER priority pipelines.

mod agent;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{Approximator, OptimizerKind};
use crate::error::{Error, Result};
use crate::replay::{DmPerParams, Transition};

pub use agent::{Agent, EperEstimator, TrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// State-value prediction for the uniform random policy.
    PredictionTd0,
    TabularQ,
    Dqn,
}

impl LearnerKind {
    pub fn is_control(self) -> bool {
        !matches!(self, Self::PredictionTd0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayVariant {
    Uniform,
    NaivePer,
    DmPer,
    Eper,
}

impl ReplayVariant {
    pub const ALL: [ReplayVariant; 4] = [Self::Uniform, Self::NaivePer, Self::DmPer, Self::Eper];

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::NaivePer => "naive_per",
            Self::DmPer => "dm_per",
            Self::Eper => "eper",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Tabular,
    Mlp,
}

/// Everything an [`Agent`] needs besides the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: LearnerKind,
    pub variant: ReplayVariant,
    pub representation: RepresentationKind,
    pub hidden: usize,
    pub learning_rate: f64,
    /// Step size of the EPER estimator; the value learning rate if unset.
    pub eper_learning_rate: Option<f64>,
    pub batch_size: usize,
    pub capacity: usize,
    pub replacement: bool,
    pub recompute_every: Option<u64>,
    pub target_refresh: Option<u64>,
    /// Bootstrap from the online network when recomputing priorities even
    /// if a target network exists.
    pub recompute_with_online: bool,
    pub epsilon: f64,
    pub optimizer: OptimizerKind,
    pub adam_eps: f64,
    pub dm_per: DmPerParams,
}

impl AgentSpec {
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |p: &str, m: &str| Err((p.to_string(), m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("agent.learning_rate", "must be finite and > 0");
        }
        if let Some(lr) = self.eper_learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return err("agent.eper_learning_rate", "must be finite and > 0");
            }
        }
        if self.batch_size == 0 {
            return err("agent.batch_size", "must be >= 1");
        }
        if self.capacity == 0 {
            return err("buffer.capacity", "must be >= 1");
        }
        if !self.replacement && self.batch_size > self.capacity {
            return err(
                "agent.batch_size",
                "cannot exceed buffer.capacity when sampling without replacement",
            );
        }
        if self.recompute_every == Some(0) {
            return err("buffer.recompute_every", "must be >= 1 when present");
        }
        if self.target_refresh == Some(0) {
            return err("agent.target_refresh", "must be >= 1 when present");
        }
        if self.target_refresh.is_some() && self.kind == LearnerKind::TabularQ {
            return err("agent.target_refresh", "tabular Q-learning has no target network");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return err("agent.epsilon", "must lie in [0, 1]");
        }
        if self.representation == RepresentationKind::Mlp && self.hidden == 0 {
            return err("agent.hidden", "must be >= 1");
        }
        if self.kind == LearnerKind::TabularQ && self.representation != RepresentationKind::Tabular {
            return err("agent.representation", "tabular_q requires a tabular representation");
        }
        if self.kind == LearnerKind::Dqn && self.representation != RepresentationKind::Mlp {
            return err("agent.representation", "dqn requires an mlp representation");
        }
        if !(self.adam_eps >= 0.0 && self.adam_eps.is_finite()) {
            return err("agent.adam_eps", "must be finite and >= 0");
        }
        if let Err(m) = self.dm_per.validate() {
            return err("buffer.dm_per", &m);
        }
        Ok(())
    }
}

fn bootstrap_features_needed(t: &Transition) -> bool {
    t.discount != 0.0
}

/// `δ = r + γ' v_target(s') − v(s)`; `s'` is not evaluated when `γ' = 0`.
pub fn td_error_prediction(v: &Approximator, v_target: &Approximator, t: &Transition) -> Result<f64> {
    let next = if bootstrap_features_needed(t) {
        t.discount * v_target.value(&t.s_next, 0)?
    } else {
        0.0
    };
    Ok(t.r + next - v.value(&t.s, 0)?)
}

/// `δ = r + γ' max_a q_target(s', a) − q(s, a)`.
pub fn td_error_control(q: &Approximator, q_target: &Approximator, t: &Transition) -> Result<f64> {
    let next = if bootstrap_features_needed(t) {
        t.discount * q_target.max_value(&t.s_next)?
    } else {
        0.0
    };
    Ok(t.r + next - q.value(&t.s, t.a)?)
}

/// Greedy action with probability `1 − ε` (ties uniform), uniform otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(qvals: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if qvals.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..qvals.len()));
    }
    argmax_random_tie(qvals, rng)
}

pub fn argmax_random_tie<R: Rng + ?Sized>(qvals: &[f64], rng: &mut R) -> Result<usize> {
    if qvals.iter().any(|q| q.is_nan()) {
        return Err(Error::NonFinite("action values"));
    }
    let best = qvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..qvals.len()).filter(|&i| qvals[i] == best).collect();
    Ok(if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    })
}
