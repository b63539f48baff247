//! Exact dynamic-programming oracles for the tabular environments.

use std::collections::VecDeque;

use super::{chain, cliffworld, StepOutcome};
use crate::error::{Error, Result};

/// Dense row-major square matrix, just big enough for the 50-state solves.
#[derive(Clone, Debug)]
struct Dense {
    n: usize,
    a: Vec<f64>,
}

impl Dense {
    fn identity(n: usize) -> Self {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        Self { n, a }
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }

    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum())
            .collect()
    }

    fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = self.a[i * n + j];
            }
        }
        Self { n, a: t }
    }
}

/// Solves `m x = b` with partial-pivot Gaussian elimination plus a few
/// rounds of iterative refinement. Returns the solution and the max-abs
/// residual.
fn solve(m: &Dense, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = m.n;
    let mut lu = m.a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
            .expect("non-empty");
        if lu[pivot * n + k].abs() < 1e-300 {
            return Err(Error::Env("singular linear system".into()));
        }
        if pivot != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot * n + j);
            }
            perm.swap(k, pivot);
        }
        for i in k + 1..n {
            let f = lu[i * n + k] / lu[k * n + k];
            lu[i * n + k] = f;
            for j in k + 1..n {
                lu[i * n + j] -= f * lu[k * n + j];
            }
        }
    }
    let lu_solve = |rhs: &[f64]| -> Vec<f64> {
        let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= lu[i * n + j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= lu[i * n + j] * y[j];
            }
            y[i] /= lu[i * n + i];
        }
        y
    };
    let residual = |x: &[f64]| -> Vec<f64> {
        let mx = m.mul_vec(x);
        b.iter().zip(mx).map(|(bi, mi)| bi - mi).collect()
    };
    let mut x = lu_solve(b);
    for _ in 0..3 {
        let r = residual(&x);
        let dx = lu_solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
    }
    let res = residual(&x).iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok((x, res))
}

/// Uniform-random-policy dynamics of a deterministic tabular environment:
/// `p[s][s']` (discount folded in) and expected one-step reward `r[s]`.
struct PolicyModel {
    discounted: Dense,
    undiscounted: Dense,
    reward: Vec<f64>,
}

fn uniform_policy_model(
    n_states: usize,
    n_actions: usize,
    step: impl Fn(usize, usize) -> StepOutcome,
) -> PolicyModel {
    let mut discounted = Dense {
        n: n_states,
        a: vec![0.0; n_states * n_states],
    };
    let mut undiscounted = discounted.clone();
    let mut reward = vec![0.0; n_states];
    let pi = 1.0 / n_actions as f64;
    for s in 0..n_states {
        for a in 0..n_actions {
            let out = step(s, a);
            reward[s] += pi * out.reward;
            if !out.next_state.terminal {
                let next = out.next_state.index().expect("tabular env");
                *discounted.at(s, next) += pi * out.discount;
                *undiscounted.at(s, next) += pi;
            }
        }
    }
    PolicyModel {
        discounted,
        undiscounted,
        reward,
    }
}

/// Exact solution of a policy-evaluation or occupancy system.
#[derive(Clone, Debug)]
pub struct Solution {
    pub values: Vec<f64>,
    pub residual: f64,
}

/// `v_π` of the uniform-random policy on the 50-state chain, from
/// `(I - γ P_π) v = r_π`.
pub fn chain_true_values() -> Result<Solution> {
    let model = uniform_policy_model(chain::NUM_STATES, 2, chain::step);
    let n = chain::NUM_STATES;
    let mut m = Dense::identity(n);
    for (mij, pij) in m.a.iter_mut().zip(&model.discounted.a) {
        *mij -= pij;
    }
    let (values, residual) = solve(&m, &model.reward)?;
    Ok(Solution { values, residual })
}

/// On-policy state-visitation distribution of the uniform policy on the
/// chain: expected visits per episode from the start state, normalised.
/// The reported residual is that of the unnormalised occupancy system.
pub fn chain_visitation() -> Result<Solution> {
    let model = uniform_policy_model(chain::NUM_STATES, 2, chain::step);
    let n = chain::NUM_STATES;
    let pt = model.undiscounted.transpose();
    let mut m = Dense::identity(n);
    for (mij, pij) in m.a.iter_mut().zip(&pt.a) {
        *mij -= pij;
    }
    let mut start = vec![0.0; n];
    start[chain::START] = 1.0;
    let (visits, residual) = solve(&m, &start)?;
    let total: f64 = visits.iter().sum();
    Ok(Solution {
        values: visits.iter().map(|v| v / total).collect(),
        residual,
    })
}

/// Expected episode length of the uniform policy on the chain.
pub fn chain_expected_episode_length() -> Result<f64> {
    let model = uniform_policy_model(chain::NUM_STATES, 2, chain::step);
    let n = chain::NUM_STATES;
    let pt = model.undiscounted.transpose();
    let mut m = Dense::identity(n);
    for (mij, pij) in m.a.iter_mut().zip(&pt.a) {
        *mij -= pij;
    }
    let mut start = vec![0.0; n];
    start[chain::START] = 1.0;
    Ok(solve(&m, &start)?.0.iter().sum())
}

/// Shortest number of transitions from `start` to termination in a
/// deterministic tabular environment, by breadth-first search.
pub fn shortest_episode(
    n_states: usize,
    n_actions: usize,
    start: usize,
    step: impl Fn(usize, usize) -> StepOutcome,
) -> Option<usize> {
    let mut dist = vec![usize::MAX; n_states];
    let mut queue = VecDeque::from([start]);
    dist[start] = 0;
    while let Some(s) = queue.pop_front() {
        for a in 0..n_actions {
            let out = step(s, a);
            if out.next_state.terminal {
                return Some(dist[s] + 1);
            }
            let next = out.next_state.index().expect("tabular env");
            if dist[next] == usize::MAX {
                dist[next] = dist[s] + 1;
                queue.push_back(next);
            }
        }
    }
    None
}

pub fn chain_optimal_steps() -> usize {
    shortest_episode(chain::NUM_STATES, 2, chain::START, chain::step).expect("goal reachable")
}

/// Optimal state values of a deterministic tabular environment by value
/// iteration, stopping when the sup-norm change falls below `tol`.
pub fn value_iteration(
    n_states: usize,
    n_actions: usize,
    gamma_override: Option<f64>,
    tol: f64,
    max_sweeps: usize,
    step: impl Fn(usize, usize) -> StepOutcome,
) -> Vec<f64> {
    let mut v = vec![0.0; n_states];
    for _ in 0..max_sweeps {
        let mut delta = 0.0f64;
        for s in 0..n_states {
            let best = (0..n_actions)
                .map(|a| {
                    let out = step(s, a);
                    if out.next_state.terminal {
                        out.reward
                    } else {
                        let g = gamma_override.unwrap_or(out.discount);
                        out.reward + g * v[out.next_state.index().expect("tabular env")]
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < tol {
            break;
        }
    }
    v
}

/// Undiscounted optimal return from the cliffworld start state.
pub fn cliffworld_optimal_return() -> f64 {
    let v = value_iteration(
        cliffworld::NUM_STATES,
        cliffworld::NUM_ACTIONS,
        Some(1.0),
        1e-12,
        10_000,
        cliffworld::step,
    );
    v[cliffworld::START]
}
