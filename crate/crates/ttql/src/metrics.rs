//! Error metrics: maximal normed error (MNE) and maximal normed Bellman error
//! (MNBE).
//!
//! MNE is the sup-norm distance to the optimal Q-table and needs an oracle
//! solution; MNBE is the sup-norm of the Bellman residual `q - T q` and is
//! computable from the MDP alone. They sandwich each other:
//!
//! ```text
//! (1 - gamma) * MNE(q) <= MNBE(q) <= (1 + gamma) * MNE(q)
//! ```
//!
//! so `MNBE / (1 - gamma)` is a computable upper bound on the true error. That
//! proxy is what the transfer gate in [`crate::learner`] runs on.

use crate::error::Result;
use crate::mdp::{Mdp, QTable};
use crate::rng::{substream, DetRng};
use rand::Rng;

/// MNE and MNBE of one table, with the proxy bound relating them.
#[derive(Debug, Clone, Copy)]
pub struct ErrorPair {
    pub mne: f64,
    pub mnbe: f64,
    /// `mnbe / (1 - gamma)`; always at least `mne` up to oracle accuracy.
    pub proxy_bound: f64,
}

/// Sup-norm distance between a table and the oracle solution.
pub fn mne(q: &QTable, q_star: &QTable) -> Result<f64> {
    q.sup_diff(q_star)
}

/// Exact maximal normed Bellman error `max_{s,a} |q(s,a) - (T q)(s,a)|`.
///
/// Single pass; agrees with scanning `q` against
/// [`Mdp::bellman_optimal`]`(q)` entry by entry up to the expectation's fold
/// order (this one folds left to right).
pub fn mnbe_exact(q: &QTable, mdp: &Mdp) -> Result<f64> {
    mdp.check_shape(q)?;
    let v = q.state_values();
    Ok(mnbe_with_state_values(q, mdp, &v))
}

/// MNBE given precomputed state values `v[s'] = max_a q(s', a)`.
///
/// The expectation folds left to right with `f64::mul_add`, one rounding per
/// term. That order is part of the crate's determinism contract: the learner's
/// fused per-step pass reproduces it lane for lane, so gate decisions and
/// trace columns agree bit for bit with this function.
pub(crate) fn mnbe_with_state_values(q: &QTable, mdp: &Mdp, v: &[f64]) -> f64 {
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let reward = mdp.reward_table();
    let transition = mdp.transition_table();
    let mut worst: f64 = 0.0;
    for (sa, (&qv, &r)) in q.values().iter().zip(reward).enumerate() {
        let row = &transition[sa * n..(sa + 1) * n];
        let mut exp = 0.0f64;
        for (&p, &vv) in row.iter().zip(v) {
            exp = p.mul_add(vv, exp);
        }
        let residual = qv - (r + gamma * exp);
        worst = worst.max(residual.abs());
    }
    worst
}

/// Signed per-pair Bellman residual estimates from sampled next states.
///
/// For each `(s, a)` the expectation over next states is replaced by an
/// empirical mean of `draws_per_pair` samples, giving an unbiased estimate of
/// `q(s,a) - (T q)(s,a)` before any absolute value or max is taken. One `u64`
/// is consumed from `rng` as a base seed; each pair then draws from its own
/// derived substream, so the result is independent of pair evaluation order.
pub fn sampled_bellman_residuals(
    q: &QTable,
    mdp: &Mdp,
    draws_per_pair: usize,
    rng: &mut DetRng,
) -> Result<Vec<f64>> {
    mdp.check_shape(q)?;
    if draws_per_pair == 0 {
        return Err(crate::error::Error::InvalidArgument(
            "draws_per_pair must be at least 1".into(),
        ));
    }
    let v = q.state_values();
    let gamma = mdp.gamma();
    let base: u64 = rng.random();
    let mut out = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let mut pair_rng = substream(base, &[s as u64, a as u64]);
            let mut acc = 0.0;
            for _ in 0..draws_per_pair {
                let next = mdp.sample_next_state(s, a, &mut pair_rng)?;
                acc += v[next];
            }
            let mean = acc / draws_per_pair as f64;
            out.push(q.get(s, a) - (mdp.reward(s, a) + gamma * mean));
        }
    }
    Ok(out)
}

/// Sampled MNBE: max absolute value of [`sampled_bellman_residuals`].
pub fn mnbe_sampled(
    q: &QTable,
    mdp: &Mdp,
    draws_per_pair: usize,
    rng: &mut DetRng,
) -> Result<f64> {
    let residuals = sampled_bellman_residuals(q, mdp, draws_per_pair, rng)?;
    Ok(residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())))
}

/// Evaluate MNE, MNBE, and the proxy bound for `q` against an oracle solution.
pub fn error_pair(q: &QTable, mdp: &Mdp, q_star: &QTable) -> Result<ErrorPair> {
    let mne = mne(q, q_star)?;
    let mnbe = mnbe_exact(q, mdp)?;
    Ok(ErrorPair {
        mne,
        mnbe,
        proxy_bound: mnbe / (1.0 - mdp.gamma()),
    })
}
