//! Array-backed binary sum tree over a fixed number of leaves.
//!
//! Leaves live at `[size, 2 * size)` where `size` is the capacity rounded up
//! to a power of two; unused leaves hold zero. Every internal node is
//! recomputed as `left + right` on update (never patched by a delta), so the
//! parent-equals-sum-of-children invariant holds exactly after any sequence
//! of writes.

#[derive(Clone, Debug)]
pub struct SumTree {
    capacity: usize,
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "sum tree capacity must be positive");
        let size = capacity.next_power_of_two();
        Self {
            capacity,
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.nodes[self.size + index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        debug_assert!(index < self.capacity);
        debug_assert!(value >= 0.0 && value.is_finite());
        let mut node = self.size + index;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Rebuilds every internal node from the leaves in O(capacity).
    pub fn rebuild_from(&mut self, leaves: impl IntoIterator<Item = f64>) {
        self.nodes.iter_mut().for_each(|n| *n = 0.0);
        for (i, v) in leaves.into_iter().enumerate().take(self.capacity) {
            self.nodes[self.size + i] = v;
        }
        for node in (1..self.size).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Returns the leaf `i` with `prefix(i) <= mass < prefix(i + 1)`.
    ///
    /// Zero-mass leaves are never returned while any positive leaf exists;
    /// masses at or above the total clamp to the last positive leaf.
    pub fn find_prefix_sum(&self, mass: f64) -> usize {
        let mut node = 1;
        let mut mass = mass.max(0.0);
        while node < self.size {
            let left = 2 * node;
            let right = left + 1;
            if mass < self.nodes[left] || self.nodes[right] <= 0.0 {
                node = left;
            } else {
                mass -= self.nodes[left];
                node = right;
            }
        }
        let mut index = node - self.size;
        // Rounding can steer the descent onto an empty leaf at the right
        // edge of a subtree; walk back to the nearest positive one.
        while self.nodes[self.size + index] <= 0.0 && index > 0 {
            index -= 1;
        }
        index
    }

    /// Internal nodes whose stored value differs from the sum of their
    /// children by more than `rel_tol` (relative). Empty in a consistent tree.
    pub fn inconsistent_nodes(&self, rel_tol: f64) -> Vec<usize> {
        (1..self.size)
            .filter(|&node| {
                let sum = self.nodes[2 * node] + self.nodes[2 * node + 1];
                (self.nodes[node] - sum).abs() > rel_tol * sum.abs().max(f64::MIN_POSITIVE)
            })
            .collect()
    }
}
