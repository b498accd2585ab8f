//! Array-backed binary sum tree over nonnegative leaf values.
//!
//! Supports point updates, prefix sums and weighted sampling by descent,
//! each in O(log n). Leaves beyond the logical length are zero and can
//! never be reached by a descent.

#[derive(Debug, Clone)]
pub struct SumTree {
    /// Number of logical leaves.
    len: usize,
    /// Power-of-two leaf capacity.
    cap: usize,
    /// `node[1]` is the root; leaf `i` lives at `node[cap + i]`.
    node: Vec<f64>,
}

impl SumTree {
    pub fn from_values(values: &[f64]) -> Self {
        let len = values.len();
        let cap = len.next_power_of_two().max(1);
        let mut node = vec![0.0; 2 * cap];
        node[cap..cap + len].copy_from_slice(values);
        for i in (1..cap).rev() {
            node[i] = node[2 * i] + node[2 * i + 1];
        }
        SumTree { len, cap, node }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> f64 {
        self.node[1]
    }

    pub fn leaf(&self, index: usize) -> f64 {
        debug_assert!(index < self.len);
        self.node[self.cap + index]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.node[self.cap..self.cap + self.len]
    }

    /// Sets leaf `index` to `value` and repairs the path to the root.
    pub fn set(&mut self, index: usize, value: f64) {
        debug_assert!(index < self.len);
        let mut i = self.cap + index;
        self.node[i] = value;
        while i > 1 {
            i /= 2;
            self.node[i] = self.node[2 * i] + self.node[2 * i + 1];
        }
    }

    /// Sum of leaves `0..=index`.
    pub fn prefix_sum(&self, index: usize) -> f64 {
        debug_assert!(index < self.len);
        // Accumulate every left sibling on the path from the leaf to the root.
        let mut i = self.cap + index;
        let mut sum = self.node[i];
        while i > 1 {
            if i % 2 == 1 {
                sum += self.node[i - 1];
            }
            i /= 2;
        }
        sum
    }

    /// Returns the leaf index selected by mass coordinate `target` in
    /// `[0, total)`: the first leaf whose cumulative sum exceeds `target`.
    /// A `target` that lands exactly on a subtree boundary descends right.
    pub fn descend(&self, mut target: f64) -> usize {
        let mut i = 1;
        while i < self.cap {
            let left = self.node[2 * i];
            if target < left {
                i = 2 * i;
            } else {
                target -= left;
                i = 2 * i + 1;
            }
        }
        // Rounding at the top of the tree can push a target just past the
        // last nonzero leaf; clamp back into range.
        (i - self.cap).min(self.len - 1)
    }
}
