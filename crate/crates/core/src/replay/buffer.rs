use rand::seq::index;
use rand::Rng;

use super::{IsNormalization, Regime, SumTree, Transition, PRIORITY_FLOOR};
use crate::error::{Error, Result};

/// A drawn mini-batch. `probabilities[k]` is the chance item `indices[k]`
/// had at the moment it was drawn (conditional on earlier draws when
/// sampling without replacement).
#[derive(Clone, Debug, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub transitions: Vec<Transition>,
    pub probabilities: Vec<f64>,
    pub is_weights: Vec<f64>,
}

impl SampledBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// FIFO ring of transitions over a sum tree of priorities.
///
/// Priorities are stored raw (`max(|p|, floor)`); the tree holds
/// `p^exponent`, where the exponent follows whichever regime sampled last
/// (1 for proportional, α for DM-PER). Switching exponents rebuilds the tree.
#[derive(Clone, Debug)]
pub struct PrioritizedBuffer {
    capacity: usize,
    items: Vec<Transition>,
    priorities: Vec<f64>,
    next: usize,
    tree: SumTree,
    exponent: f64,
    max_priority_seen: f64,
}

fn check_priority(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::NonFinite("priority"));
    }
    Ok(p.abs().max(PRIORITY_FLOOR))
}

impl PrioritizedBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 20)),
            priorities: Vec::with_capacity(capacity.min(1 << 20)),
            next: 0,
            tree: SumTree::new(capacity),
            exponent: 1.0,
            max_priority_seen: 1.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.items.get(slot)
    }

    pub fn priority(&self, slot: usize) -> Option<f64> {
        self.priorities.get(slot).copied()
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priorities
    }

    /// Tree mass of a slot, i.e. `priority^exponent`.
    pub fn sampling_mass(&self, slot: usize) -> f64 {
        self.tree.get(slot)
    }

    pub fn total_mass(&self) -> f64 {
        self.tree.total()
    }

    pub fn max_priority_seen(&self) -> f64 {
        self.max_priority_seen
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Slots from oldest to newest.
    pub fn slots_by_age(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.items.len();
        let start = if n == self.capacity { self.next } else { 0 };
        (0..n).map(move |k| (start + k) % n.max(1))
    }

    fn mass(&self, p: f64) -> f64 {
        if self.exponent == 1.0 {
            p
        } else {
            p.powf(self.exponent)
        }
    }

    fn store(&mut self, slot: usize, p: f64) {
        self.priorities[slot] = p;
        self.max_priority_seen = self.max_priority_seen.max(p);
        let m = self.mass(p);
        self.tree.set(slot, m);
    }

    /// Stores `t` with priority `max(|priority|, floor)`, evicting the
    /// oldest item when full. Returns the slot written.
    pub fn insert(&mut self, t: Transition, priority: f64) -> Result<usize> {
        let p = check_priority(priority)?;
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(t);
            self.priorities.push(p);
        } else {
            self.items[slot] = t;
        }
        self.store(slot, p);
        self.next = (self.next + 1) % self.capacity;
        Ok(slot)
    }

    /// DM-PER insertion: the new item gets the largest priority seen so
    /// far (so its sampling mass is `max_seen^α` under DM-PER draws).
    pub fn insert_with_max_priority(&mut self, t: Transition) -> Result<usize> {
        let p = self.max_priority_seen;
        self.insert(t, p)
    }

    /// Sets `priority[slot] = max(|p|, floor)` in order, so repeated slots
    /// keep the last value. All values are checked before any is written.
    pub fn update_priorities(&mut self, slots: &[usize], priorities: &[f64]) -> Result<()> {
        if slots.len() != priorities.len() {
            return Err(Error::Dimension {
                expected: slots.len(),
                got: priorities.len(),
            });
        }
        let checked = priorities
            .iter()
            .map(|&p| check_priority(p))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&bad) = slots.iter().find(|&&s| s >= self.items.len()) {
            return Err(Error::Replay(format!(
                "slot {bad} out of range (size {})",
                self.items.len()
            )));
        }
        for (&slot, p) in slots.iter().zip(checked) {
            self.store(slot, p);
        }
        Ok(())
    }

    /// Replaces every stored priority by `max(|f(t)|, floor)` and rebuilds
    /// the tree. Nothing changes if `f` fails on any item.
    pub fn recompute_all<E>(
        &mut self,
        mut f: impl FnMut(&Transition) -> std::result::Result<f64, E>,
    ) -> std::result::Result<(), E>
    where
        E: From<Error>,
    {
        let mut fresh = Vec::with_capacity(self.items.len());
        for t in &self.items {
            fresh.push(check_priority(f(t)?)?);
        }
        for &p in &fresh {
            self.max_priority_seen = self.max_priority_seen.max(p);
        }
        self.priorities = fresh;
        self.rebuild();
        Ok(())
    }

    fn rebuild(&mut self) {
        let masses: Vec<f64> = self.priorities.iter().map(|&p| self.mass(p)).collect();
        self.tree.rebuild_from(masses);
    }

    fn set_exponent(&mut self, exponent: f64) {
        if self.exponent != exponent {
            self.exponent = exponent;
            self.rebuild();
        }
    }

    /// Per-slot sampling probability of a single with-replacement draw.
    pub fn probabilities(&mut self, regime: &Regime) -> Vec<f64> {
        let n = self.len();
        match regime {
            Regime::Uniform => vec![1.0 / n as f64; n],
            Regime::Proportional => {
                self.set_exponent(1.0);
                let total = self.tree.total();
                (0..n).map(|i| self.tree.get(i) / total).collect()
            }
            Regime::DmPer { params, .. } => {
                self.set_exponent(params.priority_exponent);
                let total = self.tree.total();
                let eta = params.mixin;
                (0..n)
                    .map(|i| (1.0 - eta) * self.tree.get(i) / total + eta / n as f64)
                    .collect()
            }
        }
    }

    /// Draws `batch` slots under `regime`.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        batch: usize,
        regime: &Regime,
        replacement: bool,
        rng: &mut R,
    ) -> Result<SampledBatch> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Replay("cannot sample from an empty buffer".into()));
        }
        if !replacement && batch > n {
            return Err(Error::Replay(format!(
                "batch {batch} exceeds buffer size {n} without replacement"
            )));
        }
        let (indices, probabilities) = match regime {
            Regime::Uniform => self.draw_uniform(batch, replacement, rng),
            Regime::Proportional => {
                self.set_exponent(1.0);
                self.draw_prioritized(batch, 0.0, replacement, rng)
            }
            Regime::DmPer { params, .. } => {
                self.set_exponent(params.priority_exponent);
                self.draw_prioritized(batch, params.mixin, replacement, rng)
            }
        };
        let is_weights = match regime {
            Regime::DmPer {
                params,
                step,
                horizon,
            } => {
                let beta = params.beta(*step, *horizon);
                let raw: Vec<f64> = probabilities
                    .iter()
                    .map(|&p| (n as f64 * p).powf(-beta))
                    .collect();
                let norm = match params.is_normalization {
                    IsNormalization::BatchMax => raw.iter().copied().fold(0.0, f64::max),
                    IsNormalization::BufferMax => {
                        let p_min = self.min_probability(params.mixin);
                        (n as f64 * p_min).powf(-beta)
                    }
                    IsNormalization::None => 1.0,
                };
                raw.into_iter().map(|w| w / norm).collect()
            }
            _ => vec![1.0; indices.len()],
        };
        let transitions = indices.iter().map(|&i| self.items[i].clone()).collect();
        Ok(SampledBatch {
            indices,
            transitions,
            probabilities,
            is_weights,
        })
    }

    fn min_probability(&self, eta: f64) -> f64 {
        let n = self.len();
        let total = self.tree.total();
        let min_mass = (0..n).map(|i| self.tree.get(i)).fold(f64::INFINITY, f64::min);
        (1.0 - eta) * min_mass / total + eta / n as f64
    }

    fn draw_uniform<R: Rng + ?Sized>(
        &self,
        batch: usize,
        replacement: bool,
        rng: &mut R,
    ) -> (Vec<usize>, Vec<f64>) {
        let n = self.len();
        if replacement {
            let idx = (0..batch).map(|_| rng.gen_range(0..n)).collect();
            (idx, vec![1.0 / n as f64; batch])
        } else {
            let idx = index::sample(rng, n, batch).into_vec();
            let probs = (0..batch).map(|k| 1.0 / (n - k) as f64).collect();
            (idx, probs)
        }
    }

    /// Mixture draw `(1 - eta) * tree + eta * uniform`; without replacement
    /// each drawn slot is masked out and the remaining mass renormalised.
    fn draw_prioritized<R: Rng + ?Sized>(
        &mut self,
        batch: usize,
        eta: f64,
        replacement: bool,
        rng: &mut R,
    ) -> (Vec<usize>, Vec<f64>) {
        let n = self.len();
        let mut indices = Vec::with_capacity(batch);
        let mut probs = Vec::with_capacity(batch);
        let mut masked: Vec<(usize, f64)> = Vec::new();
        for k in 0..batch {
            let remaining = if replacement { n } else { n - k };
            let total = self.tree.total();
            let i = if eta > 0.0 && rng.gen::<f64>() < eta {
                if replacement {
                    rng.gen_range(0..n)
                } else {
                    self.uniform_unmasked(&masked, remaining, rng)
                }
            } else {
                let u: f64 = rng.gen();
                self.tree.find_prefix_sum(u * total)
            };
            let p = (1.0 - eta) * self.tree.get(i) / total + eta / remaining as f64;
            indices.push(i);
            probs.push(p);
            if !replacement {
                masked.push((i, self.tree.get(i)));
                self.tree.set(i, 0.0);
            }
        }
        for &(i, m) in masked.iter().rev() {
            self.tree.set(i, m);
        }
        (indices, probs)
    }

    fn uniform_unmasked<R: Rng + ?Sized>(
        &self,
        masked: &[(usize, f64)],
        remaining: usize,
        rng: &mut R,
    ) -> usize {
        let n = self.len();
        if masked.len() * 2 <= n {
            loop {
                let i = rng.gen_range(0..n);
                if !masked.iter().any(|&(m, _)| m == i) {
                    return i;
                }
            }
        }
        let k = rng.gen_range(0..remaining);
        (0..n)
            .filter(|i| !masked.iter().any(|&(m, _)| m == *i))
            .nth(k)
            .expect("remaining count matches unmasked slots")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Features;
    use crate::replay::DmPerParams;
    use crate::rng::stream;

    fn t(i: usize) -> Transition {
        Transition {
            s: Features::Index(i),
            a: 0,
            r: 0.0,
            s_next: Features::Index(i + 1),
            discount: 0.99,
        }
    }

    fn filled(priorities: &[f64]) -> PrioritizedBuffer {
        let mut b = PrioritizedBuffer::new(priorities.len());
        for (i, &p) in priorities.iter().enumerate() {
            b.insert(t(i), p).unwrap();
        }
        b
    }

    #[test]
    fn zero_priority_is_floored() {
        let mut b = PrioritizedBuffer::new(4);
        let slot = b.insert(t(0), 0.0).unwrap();
        assert_eq!(b.priority(slot), Some(PRIORITY_FLOOR));
        b.update_priorities(&[slot], &[0.0]).unwrap();
        assert_eq!(b.priority(slot), Some(PRIORITY_FLOOR));
    }

    #[test]
    fn fifo_eviction() {
        let mut b = PrioritizedBuffer::new(2);
        b.insert(t(0), 1.0).unwrap();
        b.insert(t(1), 1.0).unwrap();
        let slot = b.insert(t(2), 1.0).unwrap();
        assert_eq!(slot, 0);
        assert_eq!(b.len(), 2);
        let ages: Vec<_> = b
            .slots_by_age()
            .map(|s| b.get(s).unwrap().s.index().unwrap())
            .collect();
        assert_eq!(ages, vec![1, 2]);
    }

    #[test]
    fn non_finite_priorities_rejected() {
        let mut b = PrioritizedBuffer::new(2);
        assert!(b.insert(t(0), f64::NAN).is_err());
        assert!(b.is_empty());
        b.insert(t(0), 1.0).unwrap();
        assert!(b.update_priorities(&[0], &[f64::INFINITY]).is_err());
        assert_eq!(b.priority(0), Some(1.0));
    }

    #[test]
    fn duplicate_updates_last_write_wins() {
        let mut b = filled(&[1.0, 1.0, 1.0, 1.0]);
        b.update_priorities(&[3, 3], &[5.0, 7.0]).unwrap();
        assert_eq!(b.priority(3), Some(7.0));
        assert_eq!(b.total_mass(), 10.0);
    }

    #[test]
    fn dm_insert_uses_max_priority_and_exponent() {
        let mut b = filled(&[0.5, 4.0]);
        let params = DmPerParams::default();
        let regime = Regime::DmPer {
            params,
            step: 0,
            horizon: 10,
        };
        let mut rng = stream(0, "t");
        b.sample(1, &regime, true, &mut rng).unwrap();
        let mut bigger = PrioritizedBuffer::new(3);
        bigger.insert(t(0), 0.5).unwrap();
        bigger.insert(t(1), 4.0).unwrap();
        bigger.sample(1, &regime, true, &mut rng).unwrap();
        let slot = bigger.insert_with_max_priority(t(2)).unwrap();
        assert_eq!(bigger.priority(slot), Some(4.0));
        assert_eq!(bigger.sampling_mass(slot), 4.0f64.powf(0.6));
    }

    #[test]
    fn initial_max_priority_is_one() {
        let mut b = PrioritizedBuffer::new(3);
        let slot = b.insert_with_max_priority(t(0)).unwrap();
        assert_eq!(b.priority(slot), Some(1.0));
    }

    #[test]
    fn sample_errors() {
        let mut b = PrioritizedBuffer::new(4);
        let mut rng = stream(0, "t");
        assert!(b.sample(1, &Regime::Uniform, true, &mut rng).is_err());
        b.insert(t(0), 1.0).unwrap();
        assert!(b.sample(2, &Regime::Proportional, false, &mut rng).is_err());
        assert_eq!(b.sample(3, &Regime::Proportional, true, &mut rng).unwrap().len(), 3);
    }

    #[test]
    fn without_replacement_is_distinct_and_restores_tree() {
        let mut b = filled(&[1.0, 2.0, 4.0, 8.0, 16.0]);
        let before = b.total_mass();
        let mut rng = stream(1, "t");
        for _ in 0..200 {
            let batch = b.sample(5, &Regime::Proportional, false, &mut rng).unwrap();
            let mut idx = batch.indices.clone();
            idx.sort();
            idx.dedup();
            assert_eq!(idx.len(), 5);
            assert_eq!(b.total_mass(), before);
        }
    }

    #[test]
    fn dm_weights_are_max_normalised() {
        let mut b = filled(&[0.1, 1.0, 3.0, 0.5]);
        let regime = Regime::DmPer {
            params: DmPerParams::default(),
            step: 3,
            horizon: 10,
        };
        let mut rng = stream(2, "t");
        for _ in 0..100 {
            let batch = b.sample(4, &regime, true, &mut rng).unwrap();
            assert!(batch.is_weights.iter().all(|&w| w > 0.0 && w <= 1.0));
            assert!(batch.is_weights.contains(&1.0));
        }
        let regime = Regime::DmPer {
            params: DmPerParams {
                is_normalization: IsNormalization::BufferMax,
                ..DmPerParams::default()
            },
            step: 3,
            horizon: 10,
        };
        for _ in 0..100 {
            let batch = b.sample(2, &regime, false, &mut rng).unwrap();
            assert!(batch.is_weights.iter().all(|&w| w > 0.0 && w <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn recompute_all_rebuilds() {
        let mut b = filled(&[1.0, 2.0, 3.0]);
        b.recompute_all(|_| Ok::<_, Error>(0.5)).unwrap();
        assert_eq!(b.priorities(), &[0.5, 0.5, 0.5]);
        assert_eq!(b.total_mass(), 1.5);
        let err = b.recompute_all(|t| {
            if t.s.index() == Some(2) {
                Err(Error::Replay("boom".into()))
            } else {
                Ok(9.0)
            }
        });
        assert!(err.is_err());
        assert_eq!(b.priorities(), &[0.5, 0.5, 0.5]);
        let mut empty = PrioritizedBuffer::new(3);
        empty.recompute_all(|_| Ok::<_, Error>(1.0)).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn beta_schedule_is_linear() {
        let p = DmPerParams::default();
        assert_eq!(p.beta(0, 100), 0.4);
        assert_eq!(p.beta(100, 100), 1.0);
        assert_eq!(p.beta(50, 100), 0.4 + 0.6 * 0.5);
        assert_eq!(p.beta(500, 100), 1.0);
    }
}
