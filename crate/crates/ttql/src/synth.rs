//! Random MDP synthesis, controlled single-axis perturbations, and a closed-form
//! upper bound on the optimal-Q distance between two MDPs.

use crate::error::{Error, Result};
use crate::mdp::{Mdp, QTable};
use crate::rng::DetRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Perturbed component of an MDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbAxis {
    Gamma,
    Reward,
    Transition,
}

impl PerturbAxis {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbAxis::Gamma => "gamma",
            PerturbAxis::Reward => "reward",
            PerturbAxis::Transition => "transition",
        }
    }
}

impl std::str::FromStr for PerturbAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<PerturbAxis> {
        match s {
            "gamma" => Ok(PerturbAxis::Gamma),
            "reward" => Ok(PerturbAxis::Reward),
            "transition" => Ok(PerturbAxis::Transition),
            other => Err(Error::Config(format!(
                "unknown perturbation axis '{other}' (expected gamma, reward, or transition)"
            ))),
        }
    }
}

/// One perturbation: an axis and a magnitude `eps >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub axis: PerturbAxis,
    pub magnitude: f64,
}

impl PerturbSpec {
    pub fn new(axis: PerturbAxis, magnitude: f64) -> Result<PerturbSpec> {
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "perturbation magnitude must be finite and nonnegative, got {magnitude}"
            )));
        }
        Ok(PerturbSpec { axis, magnitude })
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.axis.name(), self.magnitude)
    }
}

/// Margin keeping perturbed discounts strictly inside (0, 1).
const GAMMA_MARGIN: f64 = 1e-6;

/// Draw a dense random MDP: rewards i.i.d. uniform on [0, 1), transition rows
/// i.i.d. uniform entries normalized to sum to 1.
///
/// Draw order is part of the format contract for fixture generators: all
/// `n_states * n_actions` rewards first, then each transition row's
/// `n_states` entries, `(s, a)` row-major; one `u64` per entry.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, rng: &mut DetRng) -> Result<Mdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least one state and one action, got {n_states}x{n_actions}"
        )));
    }
    let reward: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let row_start = transition.len();
        let mut sum = 0.0;
        for _ in 0..n_states {
            let x: f64 = rng.random();
            sum += x;
            transition.push(x);
        }
        if sum > 0.0 {
            for p in &mut transition[row_start..] {
                *p /= sum;
            }
        } else {
            // all draws exactly zero: vanishing probability, uniform fallback
            let u = 1.0 / n_states as f64;
            for p in &mut transition[row_start..] {
                *p = u;
            }
        }
    }
    Mdp::new(n_states, n_actions, gamma, reward, transition)
}

/// Apply a single-axis perturbation, returning a new valid MDP.
///
/// - `gamma` axis: `gamma' = gamma - eps`, clamped to stay at least
///   `1e-6` below 1; infeasible (error) when `gamma - eps` would leave (0, 1).
///   The shift is downward so that magnitudes form an increasing distance
///   ladder from any base discount without colliding with the `gamma < 1`
///   boundary. Consumes no draws.
/// - `reward` axis: `r' = clamp(r + eps * u, [0, 1])` with `u` uniform on
///   [-1, 1], one fresh draw per entry.
/// - `transition` axis: each row becomes `(1 - eps) * p + eps * u` where `u` is
///   a fresh normalized uniform row; requires `eps <= 1`. Fresh rows are drawn
///   entry by entry in row-major order.
///
/// `eps = 0` returns the input exactly on every axis (the blend is written so
/// both endpoints are bit-exact).
pub fn perturb(mdp: &Mdp, spec: &PerturbSpec, rng: &mut DetRng) -> Result<Mdp> {
    let eps = spec.magnitude;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "perturbation magnitude must be finite and nonnegative, got {eps}"
        )));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    match spec.axis {
        PerturbAxis::Gamma => {
            let target = mdp.gamma() - eps;
            if target <= GAMMA_MARGIN {
                return Err(Error::InfeasiblePerturbation(format!(
                    "gamma {} - eps {} leaves no room inside (0, 1)",
                    mdp.gamma(),
                    eps
                )));
            }
            let gamma = target.min(1.0 - GAMMA_MARGIN);
            Mdp::new(ns, na, gamma, mdp.reward_table().to_vec(), mdp.transition_table().to_vec())
        }
        PerturbAxis::Reward => {
            let reward: Vec<f64> = mdp
                .reward_table()
                .iter()
                .map(|&r| {
                    let u = 2.0 * rng.random::<f64>() - 1.0;
                    (r + eps * u).clamp(0.0, 1.0)
                })
                .collect();
            Mdp::new(ns, na, mdp.gamma(), reward, mdp.transition_table().to_vec())
        }
        PerturbAxis::Transition => {
            if eps > 1.0 {
                return Err(Error::InfeasiblePerturbation(format!(
                    "transition blend weight {eps} exceeds 1"
                )));
            }
            let keep = 1.0 - eps;
            let mut transition = Vec::with_capacity(ns * na * ns);
            let mut fresh = vec![0.0; ns];
            for row in mdp.transition_table().chunks_exact(ns) {
                let mut sum = 0.0;
                for f in fresh.iter_mut() {
                    *f = rng.random::<f64>();
                    sum += *f;
                }
                if sum <= 0.0 {
                    let u = 1.0 / ns as f64;
                    fresh.iter_mut().for_each(|f| *f = u);
                    sum = 1.0;
                }
                for (p, f) in row.iter().zip(&fresh) {
                    transition.push(keep * p + eps * (f / sum));
                }
            }
            Mdp::new(ns, na, mdp.gamma(), mdp.reward_table().to_vec(), transition)
        }
    }
}

/// Closed-form upper bound on the sup-norm distance between two optimal
/// Q-tables, split into per-component terms.
#[derive(Debug, Clone, Copy)]
pub struct DistanceBound {
    /// `||r1 - r2||_inf / (1 - gamma_used)`
    pub reward_term: f64,
    /// `gamma_used * reward_norm_used / (1 - gamma_used)^2 * ||P1 - P2||_inf`
    pub transition_term: f64,
    /// `|gamma1 - gamma2| / ((1 - gamma1)(1 - gamma2)) * reward_norm_used`
    pub gamma_term: f64,
    pub total: f64,
    /// Discount substituted into the reward and transition terms.
    pub gamma_used: f64,
    /// Reward sup-norm substituted into the transition and gamma terms.
    pub reward_norm_used: f64,
}

/// Sup norm of the entrywise reward difference.
pub fn reward_sup_distance(m1: &Mdp, m2: &Mdp) -> Result<f64> {
    check_same_space(m1, m2)?;
    Ok(m1
        .reward_table()
        .iter()
        .zip(m2.reward_table())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Max over `(s, a)` of the L1 distance between next-state rows.
pub fn transition_l1_distance(m1: &Mdp, m2: &Mdp) -> Result<f64> {
    check_same_space(m1, m2)?;
    let ns = m1.n_states();
    let mut worst = 0.0f64;
    for (r1, r2) in m1
        .transition_table()
        .chunks_exact(ns)
        .zip(m2.transition_table().chunks_exact(ns))
    {
        let l1: f64 = r1.iter().zip(r2).map(|(a, b)| (a - b).abs()).sum();
        worst = worst.max(l1);
    }
    Ok(worst)
}

/// Component-wise distance bound with the default substitution: the smaller
/// discount and the smaller reward sup-norm.
pub fn component_distance_bound(m1: &Mdp, m2: &Mdp) -> Result<DistanceBound> {
    check_same_space(m1, m2)?;
    let gamma_used = m1.gamma().min(m2.gamma());
    let reward_norm_used = sup_norm(m1.reward_table()).min(sup_norm(m2.reward_table()));
    Ok(evaluate_bound(m1, m2, gamma_used, reward_norm_used)?)
}

/// As [`component_distance_bound`], but evaluates all four (discount,
/// reward-norm) substitutions and returns the smallest total.
pub fn component_distance_bound_min(m1: &Mdp, m2: &Mdp) -> Result<DistanceBound> {
    check_same_space(m1, m2)?;
    let gammas = [m1.gamma(), m2.gamma()];
    let norms = [sup_norm(m1.reward_table()), sup_norm(m2.reward_table())];
    let mut best: Option<DistanceBound> = None;
    for &g in &gammas {
        for &n in &norms {
            let cand = evaluate_bound(m1, m2, g, n)?;
            if best.map_or(true, |b| cand.total < b.total) {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("four candidates evaluated"))
}

fn evaluate_bound(m1: &Mdp, m2: &Mdp, gamma_used: f64, reward_norm_used: f64) -> Result<DistanceBound> {
    let reward_term = reward_sup_distance(m1, m2)? / (1.0 - gamma_used);
    let transition_term = gamma_used * reward_norm_used / ((1.0 - gamma_used) * (1.0 - gamma_used))
        * transition_l1_distance(m1, m2)?;
    let gamma_term = (m1.gamma() - m2.gamma()).abs()
        / ((1.0 - m1.gamma()) * (1.0 - m2.gamma()))
        * reward_norm_used;
    Ok(DistanceBound {
        reward_term,
        transition_term,
        gamma_term,
        total: reward_term + transition_term + gamma_term,
        gamma_used,
        reward_norm_used,
    })
}

fn sup_norm(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_same_space(m1: &Mdp, m2: &Mdp) -> Result<()> {
    if m1.n_states() != m2.n_states() || m1.n_actions() != m2.n_actions() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            m1.n_states(),
            m1.n_actions(),
            m2.n_states(),
            m2.n_actions()
        )));
    }
    Ok(())
}

/// Oracle solution of a perturbed copy, for building transfer sources.
pub fn perturbed_q_star(
    mdp: &Mdp,
    spec: &PerturbSpec,
    tol: f64,
    rng: &mut DetRng,
) -> Result<(Mdp, QTable)> {
    let perturbed = perturb(mdp, spec, rng)?;
    let report = crate::solver::solve_q_star(&perturbed, tol)?;
    Ok((perturbed, report.q_star))
}
