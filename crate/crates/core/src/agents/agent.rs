use rand::{Rng, RngCore};

use super::{argmax_random_tie, epsilon_greedy, AgentSpec, LearnerKind, RepresentationKind, ReplayVariant};
use crate::approx::{pairwise_sum, Approximator, MlpModel, Optimizer};
use crate::env::{Environment, Features};
use crate::error::{Error, Result};
use crate::replay::{PrioritizedBuffer, Regime, Transition};

/// Regression estimate `h(s)` (or `h(s, a)`) of the expected TD error.
#[derive(Clone, Debug)]
pub struct EperEstimator {
    pub h: Approximator,
    pub opt: Optimizer,
    pub learning_rate: f64,
    scratch: Vec<Vec<f64>>,
    grad: Vec<f64>,
}

impl EperEstimator {
    pub fn new(h: Approximator, opt: Optimizer, learning_rate: f64) -> Self {
        Self {
            h,
            opt,
            learning_rate,
            scratch: Vec::new(),
            grad: Vec::new(),
        }
    }

    pub fn priority(&self, x: &Features, k: usize) -> Result<f64> {
        Ok(self.h.value(x, k)?.abs())
    }

    /// One optimiser step on `½ Σ_j (h(x_j)_k − δ_j)² / b`.
    pub fn update(&mut self, items: &[(&Features, usize, f64)]) -> Result<()> {
        if items.is_empty() {
            return Ok(());
        }
        let n = self.h.params().len();
        prepare(&mut self.scratch, items.len(), n);
        for (j, &(x, k, delta)) in items.iter().enumerate() {
            let fwd = self.h.forward_cached(x)?;
            let err = fwd.out[k] - delta;
            self.h.accumulate_grad(x, &fwd, k, err, &mut self.scratch[j])?;
        }
        mean_gradient(&mut self.scratch[..items.len()], &mut self.grad);
        self.opt.step(self.h.params_mut(), &self.grad, self.learning_rate)?;
        if !self.h.is_finite() {
            return Err(Error::NonFinite("EPER estimator parameters"));
        }
        Ok(())
    }
}

fn prepare(scratch: &mut Vec<Vec<f64>>, b: usize, n: usize) {
    while scratch.len() < b {
        scratch.push(vec![0.0; n]);
    }
    for g in &mut scratch[..b] {
        if g.len() == n {
            g.fill(0.0);
        } else {
            *g = vec![0.0; n];
        }
    }
}

fn mean_gradient(per_sample: &mut [Vec<f64>], out: &mut Vec<f64>) {
    let b = per_sample.len() as f64;
    let total = pairwise_sum(per_sample);
    out.clear();
    out.extend(total.iter().map(|g| g / b));
}

/// What happened during one call to [`Agent::train_step`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub trained: bool,
    pub indices: Vec<usize>,
    pub td_errors: Vec<f64>,
}

/// A value learner together with its replay buffer.
#[derive(Clone, Debug)]
pub struct Agent {
    spec: AgentSpec,
    num_actions: usize,
    net: Approximator,
    target: Option<Approximator>,
    opt: Optimizer,
    eper: Option<EperEstimator>,
    buffer: PrioritizedBuffer,
    steps: u64,
    horizon: u64,
    scratch: Vec<Vec<f64>>,
    grad: Vec<f64>,
}

fn build_representation(
    spec: &AgentSpec,
    env: &dyn Environment,
    outputs: usize,
    rng: &mut dyn RngCore,
) -> Result<Approximator> {
    Ok(match spec.representation {
        RepresentationKind::Tabular => {
            let states = env.num_states().ok_or_else(|| Error::Config {
                path: "agent.representation".into(),
                message: "tabular learners need a finite state space".into(),
            })?;
            Approximator::tabular(states, outputs)
        }
        RepresentationKind::Mlp => Approximator::Mlp(MlpModel::glorot(
            [env.feature_dim(), spec.hidden, spec.hidden, outputs],
            rng,
        )),
    })
}

impl Agent {
    /// Builds the learner. `init_rng` seeds the value network and
    /// `eper_rng` the EPER estimator.
    pub fn new(
        spec: AgentSpec,
        env: &dyn Environment,
        horizon: u64,
        init_rng: &mut dyn RngCore,
        eper_rng: &mut dyn RngCore,
    ) -> Result<Self> {
        spec.validate()
            .map_err(|(path, message)| Error::Config { path, message })?;
        let num_actions = env.num_actions();
        let outputs = if spec.kind.is_control() { num_actions } else { 1 };
        let net = build_representation(&spec, env, outputs, init_rng)?;
        let target = spec.target_refresh.map(|_| net.clone());
        let opt = Optimizer::new(spec.optimizer, net.params().len(), spec.adam_eps);
        let eper = if spec.variant == ReplayVariant::Eper {
            let mut h = build_representation(&spec, env, outputs, eper_rng)?;
            if let Approximator::Tabular(t) = &mut h {
                // A zero table would give every new transition the floor
                // priority; start from a one-hot linear layer's init instead.
                let limit = (6.0 / (t.states + t.outputs) as f64).sqrt();
                for x in &mut t.table {
                    *x = eper_rng.gen_range(-limit..limit);
                }
            }
            let opt = Optimizer::new(spec.optimizer, h.params().len(), spec.adam_eps);
            let lr = spec.eper_learning_rate.unwrap_or(spec.learning_rate);
            Some(EperEstimator::new(h, opt, lr))
        } else {
            None
        };
        Ok(Self {
            buffer: PrioritizedBuffer::new(spec.capacity),
            spec,
            num_actions,
            net,
            target,
            opt,
            eper,
            steps: 0,
            horizon,
            scratch: Vec::new(),
            grad: Vec::new(),
        })
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    pub fn net(&self) -> &Approximator {
        &self.net
    }

    /// Replaces the online network (and the target, if any).
    pub fn set_net(&mut self, net: Approximator) -> Result<()> {
        if net.params().len() != self.net.params().len() || net.outputs() != self.net.outputs() {
            return Err(Error::Dimension {
                expected: self.net.params().len(),
                got: net.params().len(),
            });
        }
        if self.target.is_some() {
            self.target = Some(net.clone());
        }
        self.net = net;
        Ok(())
    }

    pub fn target(&self) -> Option<&Approximator> {
        self.target.as_ref()
    }

    pub fn eper(&self) -> Option<&EperEstimator> {
        self.eper.as_ref()
    }

    pub fn eper_mut(&mut self) -> Option<&mut EperEstimator> {
        self.eper.as_mut()
    }

    pub fn buffer(&self) -> &PrioritizedBuffer {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut PrioritizedBuffer {
        &mut self.buffer
    }

    /// Environment steps observed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite()
            && self.target.as_ref().is_none_or(|t| t.is_finite())
            && self.eper.as_ref().is_none_or(|e| e.h.is_finite())
    }

    /// The sampling distribution used at the current step.
    pub fn regime(&self) -> Regime {
        match self.spec.variant {
            ReplayVariant::Uniform => Regime::Uniform,
            ReplayVariant::NaivePer | ReplayVariant::Eper => Regime::Proportional,
            ReplayVariant::DmPer => Regime::DmPer {
                params: self.spec.dm_per,
                step: self.steps,
                horizon: self.horizon,
            },
        }
    }

    fn output_index(&self, t: &Transition) -> usize {
        if self.spec.kind.is_control() {
            t.a
        } else {
            0
        }
    }

    /// Prediction agents follow the uniform random policy; control agents
    /// act ε-greedily on the online network.
    pub fn act(&self, x: &Features, rng: &mut dyn RngCore) -> Result<usize> {
        if self.spec.kind.is_control() {
            epsilon_greedy(&self.net.forward(x)?, self.spec.epsilon, rng)
        } else {
            Ok(rng.gen_range(0..self.num_actions))
        }
    }

    /// Greedy action with random tie-breaking.
    pub fn greedy(&self, x: &Features, rng: &mut dyn RngCore) -> Result<usize> {
        argmax_random_tie(&self.net.forward(x)?, rng)
    }

    /// `v(s)` for prediction, `max_a q(s, a)` for control.
    pub fn state_value(&self, x: &Features) -> Result<f64> {
        if self.spec.kind.is_control() {
            self.net.max_value(x)
        } else {
            self.net.value(x, 0)
        }
    }

    fn bootstrap(&self, online: bool) -> &Approximator {
        match (&self.target, online) {
            (Some(t), false) => t,
            _ => &self.net,
        }
    }

    fn td_error_with(&self, boot: &Approximator, t: &Transition) -> Result<f64> {
        if self.spec.kind.is_control() {
            super::td_error_control(&self.net, boot, t)
        } else {
            super::td_error_prediction(&self.net, boot, t)
        }
    }

    /// TD error of `t` under the current online and bootstrap networks.
    pub fn td_error(&self, t: &Transition) -> Result<f64> {
        self.td_error_with(self.bootstrap(false), t)
    }

    /// Priority a new transition is stored with.
    pub fn insertion_priority(&self, t: &Transition) -> Result<f64> {
        match self.spec.variant {
            ReplayVariant::Uniform => Ok(1.0),
            ReplayVariant::NaivePer => Ok(self.td_error(t)?.abs()),
            ReplayVariant::DmPer => Ok(self.buffer.max_priority_seen()),
            ReplayVariant::Eper => self
                .eper
                .as_ref()
                .expect("EPER agent has an estimator")
                .priority(&t.s, self.output_index(t)),
        }
    }

    /// Stores `t`, trains on one batch, then applies the target refresh
    /// and the periodic priority recompute.
    pub fn observe(&mut self, t: Transition, rng: &mut dyn RngCore) -> Result<TrainReport> {
        let p = self.insertion_priority(&t)?;
        self.buffer.insert(t, p)?;
        let report = self.train_step(rng)?;
        self.steps += 1;
        if let Some(tau) = self.spec.target_refresh {
            if self.steps.is_multiple_of(tau) {
                self.target = Some(self.net.clone());
            }
        }
        if let Some(every) = self.spec.recompute_every {
            if self.steps.is_multiple_of(every) {
                self.recompute_priorities()?;
            }
        }
        Ok(report)
    }

    /// Samples one batch and applies one optimiser step. Does nothing
    /// while the buffer holds fewer items than a draw needs.
    pub fn train_step(&mut self, rng: &mut dyn RngCore) -> Result<TrainReport> {
        let b = self.spec.batch_size;
        let needed = if self.spec.replacement { 1 } else { b };
        if self.buffer.len() < needed {
            return Ok(TrainReport::default());
        }
        let regime = self.regime();
        let batch = self.buffer.sample(b, &regime, self.spec.replacement, rng)?;

        let n = self.net.params().len();
        let mut scratch = std::mem::take(&mut self.scratch);
        prepare(&mut scratch, b, n);
        let mut deltas = Vec::with_capacity(b);
        {
            let boot = self.bootstrap(false);
            for (j, t) in batch.transitions.iter().enumerate() {
                let k = self.output_index(t);
                let fwd = self.net.forward_cached(&t.s)?;
                let next = if t.discount != 0.0 {
                    let v = if self.spec.kind.is_control() {
                        boot.max_value(&t.s_next)?
                    } else {
                        boot.value(&t.s_next, 0)?
                    };
                    t.discount * v
                } else {
                    0.0
                };
                let delta = t.r + next - fwd.out[k];
                if !delta.is_finite() {
                    self.scratch = scratch;
                    return Err(Error::NonFinite("TD error"));
                }
                let w = batch.is_weights[j];
                self.net.accumulate_grad(&t.s, &fwd, k, -w * delta, &mut scratch[j])?;
                deltas.push(delta);
            }
        }

        match self.spec.variant {
            ReplayVariant::Uniform => {}
            ReplayVariant::NaivePer | ReplayVariant::DmPer => {
                let ps: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
                self.buffer.update_priorities(&batch.indices, &ps)?;
            }
            ReplayVariant::Eper => {
                let control = self.spec.kind.is_control();
                let eper = self.eper.as_mut().expect("EPER agent has an estimator");
                let items: Vec<(&Features, usize, f64)> = batch
                    .transitions
                    .iter()
                    .zip(&deltas)
                    .map(|(t, &d)| (&t.s, if control { t.a } else { 0 }, d))
                    .collect();
                eper.update(&items)?;
                let ps = items
                    .iter()
                    .map(|&(x, k, _)| eper.priority(x, k))
                    .collect::<Result<Vec<_>>>()?;
                self.buffer.update_priorities(&batch.indices, &ps)?;
            }
        }

        mean_gradient(&mut scratch[..b], &mut self.grad);
        self.scratch = scratch;
        self.opt
            .step(self.net.params_mut(), &self.grad, self.spec.learning_rate)?;
        if !self.net.is_finite() {
            return Err(Error::NonFinite("value parameters"));
        }
        Ok(TrainReport {
            trained: true,
            indices: batch.indices,
            td_errors: deltas,
        })
    }

    /// Refreshes every stored priority: `|δ|` for Naive PER and DM-PER,
    /// `|h|` for EPER. Uniform replay ignores priorities.
    pub fn recompute_priorities(&mut self) -> Result<()> {
        let mut buffer = std::mem::replace(&mut self.buffer, PrioritizedBuffer::new(1));
        let result = match self.spec.variant {
            ReplayVariant::Uniform => Ok(()),
            ReplayVariant::NaivePer | ReplayVariant::DmPer => {
                let boot = self.bootstrap(self.spec.recompute_with_online);
                buffer.recompute_all(|t| self.td_error_with(boot, t).map(f64::abs))
            }
            ReplayVariant::Eper => {
                let eper = self.eper.as_ref().expect("EPER agent has an estimator");
                buffer.recompute_all(|t| eper.priority(&t.s, self.output_index(t)))
            }
        };
        self.buffer = buffer;
        result
    }

    pub fn kind(&self) -> LearnerKind {
        self.spec.kind
    }
}
