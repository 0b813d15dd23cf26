//! Shared pieces for the integration suites, most importantly a from-scratch
//! synchronous Q-learner used to pin the library's never-transfer path down
//! to the bit.

use rand::Rng;
use ttql::mdp::{Mdp, QTable};
use ttql::rng::DetRng;

/// One reference step record: pre-update errors, mirroring the library's
/// trace columns for a plain run.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceRow {
    pub step: usize,
    pub mne: f64,
    pub mnbe: f64,
    pub alpha: f64,
}

pub struct ReferenceRun {
    pub rows: Vec<ReferenceRow>,
    /// Final table in `(s, a)` row-major order.
    pub final_q: Vec<f64>,
}

/// Textbook synchronous Q-learning with step size `1/(t + 1)`, written
/// directly from the update rule against the public per-entry accessors:
/// each step computes the current table's state values, then every `(s, a)`
/// in row-major order draws one next state by walking the transition row's
/// prefix sums and moves the entry toward `r + gamma * v[next]`.
///
/// Everything is recomputed with local loops. The only things taken from the
/// crate are its documented numeric conventions: one uniform per pair, the
/// inverse-CDF rule "first prefix sum strictly above the draw" with a
/// last-reachable-state fallback for roundoff, and expectations folded left
/// to right with `f64::mul_add`.
pub fn reference_q_learning(
    mdp: &Mdp,
    q_star: &QTable,
    horizon: usize,
    rng: &mut DetRng,
) -> ReferenceRun {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let gamma = mdp.gamma();
    let mut q = vec![0.0f64; ns * na];
    let mut rows = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let mut v = vec![f64::NEG_INFINITY; ns];
        for s in 0..ns {
            for a in 0..na {
                if q[s * na + a] > v[s] {
                    v[s] = q[s * na + a];
                }
            }
        }

        let mut mne = 0.0f64;
        let mut mnbe = 0.0f64;
        for s in 0..ns {
            for a in 0..na {
                let d = (q[s * na + a] - q_star.get(s, a)).abs();
                if d > mne {
                    mne = d;
                }
                let mut exp = 0.0f64;
                for (j, vj) in v.iter().enumerate() {
                    exp = mdp.transition(s, a, j).mul_add(*vj, exp);
                }
                let r = (q[s * na + a] - (mdp.reward(s, a) + gamma * exp)).abs();
                if r > mnbe {
                    mnbe = r;
                }
            }
        }

        let alpha = 1.0 / (t as f64 + 1.0);
        rows.push(ReferenceRow { step: t, mne, mnbe, alpha });

        for s in 0..ns {
            for a in 0..na {
                let u: f64 = rng.random();
                let mut cum = 0.0f64;
                let mut next = None;
                for j in 0..ns {
                    cum += mdp.transition(s, a, j);
                    if u < cum {
                        next = Some(j);
                        break;
                    }
                }
                let next = next.unwrap_or_else(|| {
                    (0..ns).rev().find(|&j| mdp.transition(s, a, j) > 0.0).unwrap_or(ns - 1)
                });
                q[s * na + a] =
                    (1.0 - alpha) * q[s * na + a] + alpha * (mdp.reward(s, a) + gamma * v[next]);
            }
        }
    }
    ReferenceRun { rows, final_q: q }
}
