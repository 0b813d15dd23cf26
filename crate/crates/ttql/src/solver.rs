//! Certified optimal Q-table solver and the induced distance between MDPs.
//!
//! Value iteration from zero with an a-posteriori stopping certificate: when an
//! iterate moves by `d` in sup norm, the new iterate is within
//! `d * gamma / (1 - gamma)` of the fixed point. The solver stops as soon as
//! that certified error is at or below the requested tolerance, so callers get
//! a guaranteed accuracy, not a heuristic one.

use crate::error::{Error, Result};
use crate::mdp::{Mdp, QTable};

/// A solved Q-table together with its convergence certificate.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub q_star: QTable,
    /// Bellman applications performed.
    pub iterations: usize,
    /// Sup-norm movement of the final iteration.
    pub residual: f64,
    /// Certified bound on the sup-norm error of `q_star`:
    /// `residual * gamma / (1 - gamma)`, at most the requested tolerance.
    pub guaranteed_mne: f64,
}

/// Default iteration cap for `tol` at discount `gamma`: ten times the
/// geometric-decay estimate `ln(tol * (1 - gamma)) / ln(gamma)`, at least 1.
pub fn default_iteration_cap(gamma: f64, tol: f64) -> usize {
    let est = (tol * (1.0 - gamma)).ln() / gamma.ln();
    if est.is_finite() && est >= 1.0 {
        10 * est.ceil() as usize
    } else {
        10
    }
}

/// Solve for the optimal Q-table to certified sup-norm accuracy `tol`.
pub fn solve_q_star(mdp: &Mdp, tol: f64) -> Result<SolveReport> {
    solve_q_star_capped(mdp, tol, default_iteration_cap(mdp.gamma(), tol))
}

/// As [`solve_q_star`] with an explicit iteration cap.
pub fn solve_q_star_capped(mdp: &Mdp, tol: f64, max_iterations: usize) -> Result<SolveReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be a positive finite number, got {tol}"
        )));
    }
    let gamma = mdp.gamma();
    let blowup = gamma / (1.0 - gamma);
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut iterations = 0;
    loop {
        let next = mdp.bellman_optimal(&q)?;
        let residual = next.sup_diff(&q)?;
        iterations += 1;
        let guaranteed_mne = residual * blowup;
        if guaranteed_mne <= tol {
            return Ok(SolveReport {
                q_star: next,
                iterations,
                residual,
                guaranteed_mne,
            });
        }
        if iterations >= max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual,
                tol,
            });
        }
        q = next;
    }
}

/// Sup-norm distance between the optimal Q-tables of two MDPs over the same
/// state-action space (discounts and tables may differ).
///
/// Each side is solved to `tol / 2`, so the result is within `tol` of the true
/// distance.
pub fn mdp_distance(m1: &Mdp, m2: &Mdp, tol: f64) -> Result<f64> {
    if m1.n_states() != m2.n_states() || m1.n_actions() != m2.n_actions() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            m1.n_states(),
            m1.n_actions(),
            m2.n_states(),
            m2.n_actions()
        )));
    }
    let a = solve_q_star(m1, tol / 2.0)?;
    let b = solve_q_star(m2, tol / 2.0)?;
    a.q_star.sup_diff(&b.q_star)
}
