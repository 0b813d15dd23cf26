//! Finite tabular MDPs, Q-tables, and the optimal Bellman operator.
//!
//! An [`Mdp`] is a dense row-major table: `reward[(s, a)]` in `[0, 1]` and
//! `transition[(s, a, s')]` with each `(s, a)` row a probability distribution
//! over next states. Discounts are strictly inside `(0, 1)`.
//!
//! The optimal Bellman operator used throughout the crate is
//!
//! ```text
//! (T q)(s, a) = reward(s, a) + gamma * sum_{s'} transition(s, a, s') * max_a' q(s', a')
//! ```
//!
//! a sup-norm contraction with modulus `gamma`; its unique fixed point is the
//! optimal Q-table.

use crate::error::{Error, Result};
use crate::rng::DetRng;
use rand::Rng;

/// Transition rows must sum to 1 within this absolute tolerance. Rows built by
/// normalizing 50-odd f64 draws carry roundoff around 1e-15, two orders below.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Dot product with a fixed 4-lane fused-multiply-add accumulation order.
///
/// The order is part of the crate's determinism contract: lane `j` folds
/// elements `i % 4 == j` with `f64::mul_add`, lanes combine as
/// `(l0 + l2) + (l1 + l3)`, and the tail (up to 3 elements) folds onto that
/// left to right. `mul_add` rounds once by definition, so the result is
/// identical on every platform whether or not the target has a fused
/// instruction; the split exists so the compiler can vectorize without
/// reassociating.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut xs = a.chunks_exact(4);
    let mut ys = b.chunks_exact(4);
    let mut lanes = [0.0f64; 4];
    for (x, y) in (&mut xs).zip(&mut ys) {
        for j in 0..4 {
            lanes[j] = x[j].mul_add(y[j], lanes[j]);
        }
    }
    let mut tail = (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
    for (x, y) in xs.remainder().iter().zip(ys.remainder()) {
        tail = x.mul_add(*y, tail);
    }
    tail
}

/// A finite MDP with dense reward and transition tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    /// `(s, a)` row-major, length `n_states * n_actions`.
    reward: Vec<f64>,
    /// `(s, a, s')` row-major, length `n_states * n_actions * n_states`.
    transition: Vec<f64>,
    /// Per-(s, a) inclusive prefix sums of `transition`, each row padded out to
    /// `cum_stride` entries with `+inf`. Built once at construction;
    /// `sample_next_state` reads these. The pads can never satisfy `c <= u`
    /// for `u < 1`, so they do not affect the sampled index.
    cumulative: Vec<f64>,
    /// `n_states` rounded up to a multiple of 8, the row stride of `cumulative`.
    cum_stride: usize,
    /// `transition` regrouped for the learner's fused per-step pass: pairs go
    /// eight at a time, and within a group the eight rows' entries for each
    /// next state sit contiguously (`blocked[(g * n_states + j) * 8 + r]` is
    /// entry `j` of pair `g * 8 + r`). One sequential read then walks eight
    /// rows in lockstep. Trailing lanes of the last group are zero.
    blocked: Vec<f64>,
}

impl Mdp {
    /// Validate and build an MDP.
    ///
    /// Requires `n_states, n_actions >= 1`, `gamma` in `(0, 1)`, rewards finite
    /// in `[0, 1]`, transition entries finite and nonnegative with every
    /// `(s, a)` row summing to 1 within [`ROW_SUM_TOL`]. Rows are taken as
    /// given; nothing is renormalized here.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        reward: Vec<f64>,
        transition: Vec<f64>,
    ) -> Result<Mdp> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least one state and one action, got {n_states} states, {n_actions} actions"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie strictly inside (0, 1), got {gamma}"
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch(format!(
                "reward table has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::ShapeMismatch(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        for (i, &r) in reward.iter().enumerate() {
            if !(r.is_finite() && (0.0..=1.0).contains(&r)) {
                return Err(Error::InvalidArgument(format!(
                    "reward entry {i} is {r}, must be finite in [0, 1]"
                )));
            }
        }
        for (row_idx, row) in transition.chunks_exact(n_states).enumerate() {
            let mut sum = 0.0;
            for &p in row {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "transition row {row_idx} has entry {p}, must be finite and nonnegative"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "transition row {row_idx} sums to {sum:.17}, off by more than {ROW_SUM_TOL:e}"
                )));
            }
        }
        let cum_stride = n_states.next_multiple_of(8);
        let mut cumulative = Vec::with_capacity(n_states * n_actions * cum_stride);
        for row in transition.chunks_exact(n_states) {
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumulative.push(acc);
            }
            cumulative.resize(cumulative.len() + (cum_stride - n_states), f64::INFINITY);
        }
        let pair_count = n_states * n_actions;
        let mut blocked = vec![0.0; pair_count.div_ceil(8) * 8 * n_states];
        for (pair, row) in transition.chunks_exact(n_states).enumerate() {
            let (g, r) = (pair / 8, pair % 8);
            for (j, &p) in row.iter().enumerate() {
                blocked[(g * n_states + j) * 8 + r] = p;
            }
        }
        Ok(Mdp {
            n_states,
            n_actions,
            gamma,
            reward,
            transition,
            cumulative,
            cum_stride,
            blocked,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Full reward table, `(s, a)` row-major.
    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }

    /// Full transition table, `(s, a, s')` row-major.
    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    /// The eight-pair grouped transition layout (see the field doc).
    pub(crate) fn blocked_transitions(&self) -> &[f64] {
        &self.blocked
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[self.sa(s, a)]
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[self.sa(s, a) * self.n_states + next]
    }

    /// Next-state distribution for `(s, a)` as a slice of length `n_states`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.sa(s, a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    fn sa(&self, s: usize, a: usize) -> usize {
        debug_assert!(s < self.n_states && a < self.n_actions);
        s * self.n_actions + a
    }

    /// Apply the optimal Bellman operator to `q`.
    pub fn bellman_optimal(&self, q: &QTable) -> Result<QTable> {
        self.check_shape(q)?;
        let v = q.state_values();
        let mut out = Vec::with_capacity(self.reward.len());
        for (sa, &r) in self.reward.iter().enumerate() {
            let row = &self.transition[sa * self.n_states..(sa + 1) * self.n_states];
            out.push(r + self.gamma * dot(row, &v));
        }
        Ok(QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: out,
        })
    }

    /// Draw a next state from `transition(s, a, .)`.
    ///
    /// Consumes exactly one `u64` from `rng`, mapped to `u` uniform in `[0, 1)`;
    /// the result is the first index whose inclusive prefix sum exceeds `u`.
    /// Identical seeds give identical draw sequences.
    #[inline]
    pub fn sample_next_state(&self, s: usize, a: usize, rng: &mut DetRng) -> Result<usize> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::InvalidArgument(format!(
                "state-action ({s}, {a}) out of range for {}x{} table",
                self.n_states, self.n_actions
            )));
        }
        let sa = s * self.n_actions + a;
        let cum = &self.cumulative[sa * self.cum_stride..(sa + 1) * self.cum_stride];
        let u: f64 = rng.random();
        // The sampled index is the count of prefix sums at or below u, i.e. the
        // first index whose prefix sum exceeds u. Counting in eight float lanes
        // keeps the loop vectorizable; every element contributes exactly 0.0 or
        // 1.0, so the lane sums are small integers and the split cannot change
        // the count.
        let mut lanes = [0.0f64; 8];
        for c in cum.chunks_exact(8) {
            for j in 0..8 {
                lanes[j] += if c[j] <= u { 1.0 } else { 0.0 };
            }
        }
        let idx = (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
            + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))) as usize;
        if idx < self.n_states {
            Ok(idx)
        } else {
            // u landed past the final prefix sum (possible only through roundoff,
            // the row deficit is at most ROW_SUM_TOL): take the last reachable state.
            let row = &self.transition[sa * self.n_states..(sa + 1) * self.n_states];
            Ok(row.iter().rposition(|&p| p > 0.0).unwrap_or(self.n_states - 1))
        }
    }

    pub(crate) fn check_shape(&self, q: &QTable) -> Result<()> {
        if q.n_states != self.n_states || q.n_actions != self.n_actions {
            return Err(Error::ShapeMismatch(format!(
                "Q-table is {}x{}, MDP is {}x{}",
                q.n_states, q.n_actions, self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}

/// A dense `(state, action)` value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> QTable {
        QTable::constant(n_states, n_actions, 0.0)
    }

    pub fn constant(n_states: usize, n_actions: usize, value: f64) -> QTable {
        QTable {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    /// Build from `(s, a)` row-major values; entries must be finite.
    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<QTable> {
        if values.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} table",
                values.len(),
                n_states,
                n_actions
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Q-table entries must be finite, found {bad}"
            )));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    /// Greedy action and value at `s`; ties break to the lowest action index.
    pub fn greedy_max(&self, s: usize) -> (usize, f64) {
        let row = &self.values[s * self.n_actions..(s + 1) * self.n_actions];
        let mut best = 0;
        let mut best_v = row[0];
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > best_v {
                best = a;
                best_v = v;
            }
        }
        (best, best_v)
    }

    /// `max_a q(s, a)` for every state.
    pub fn state_values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_states);
        self.state_values_into(&mut v);
        v
    }

    /// As [`state_values`](Self::state_values), reusing `out`.
    pub fn state_values_into(&self, out: &mut Vec<f64>) {
        out.clear();
        for row in self.values.chunks_exact(self.n_actions) {
            let mut m = row[0];
            for &v in &row[1..] {
                if v > m {
                    m = v;
                }
            }
            out.push(m);
        }
    }

    /// Sup-norm distance to `other`.
    pub fn sup_diff(&self, other: &QTable) -> Result<f64> {
        if self.n_states != other.n_states || self.n_actions != other.n_actions {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.n_states, self.n_actions, other.n_states, other.n_actions
            )));
        }
        let mut m: f64 = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            m = m.max((a - b).abs());
        }
        Ok(m)
    }

    /// Largest absolute entry.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
