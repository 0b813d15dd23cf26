//! Synchronous Q-learning with a switchable bootstrap target: the learner can
//! bootstrap from its own iterate or from a fixed source table, with the
//! switch driven by a residual-comparison gate.

use crate::error::{Error, Result};
use crate::mdp::{Mdp, QTable};
use crate::metrics;
use crate::rng::DetRng;

/// How the bootstrap target is chosen each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatePolicy {
    /// Bootstrap from the source table unconditionally.
    AlwaysTransfer,
    /// Plain Q-learning; any source is ignored.
    NeverTransfer,
    /// Bootstrap from the source while its Bellman residual does not exceed
    /// the current iterate's (ties keep the source).
    BellmanGate,
    /// As [`GatePolicy::BellmanGate`] but comparing true errors against the
    /// optimal table instead of residuals. Needs oracle access, so it is a
    /// library-side diagnostic rather than a CLI mode.
    OracleErrorRatio,
}

impl GatePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            GatePolicy::AlwaysTransfer => "always",
            GatePolicy::NeverTransfer => "never",
            GatePolicy::BellmanGate => "bellman",
            GatePolicy::OracleErrorRatio => "oracle-ratio",
        }
    }

    fn needs_source(&self) -> bool {
        !matches!(self, GatePolicy::NeverTransfer)
    }
}

impl std::str::FromStr for GatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<GatePolicy> {
        match s {
            "always" => Ok(GatePolicy::AlwaysTransfer),
            "never" => Ok(GatePolicy::NeverTransfer),
            "bellman" => Ok(GatePolicy::BellmanGate),
            other => Err(Error::Config(format!(
                "unknown gate policy '{other}' (expected bellman, always, or never)"
            ))),
        }
    }
}

/// Initial iterate.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum InitQ {
    #[default]
    Zero,
    Constant(f64),
    Table(QTable),
}

/// Run parameters. `safe_check_period` is how often (in steps) the gate is
/// re-evaluated; the decision is held in between.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub horizon: usize,
    pub gate: GatePolicy,
    pub safe_check_period: usize,
    pub init: InitQ,
}

impl LearnerConfig {
    pub fn new(horizon: usize, gate: GatePolicy) -> LearnerConfig {
        LearnerConfig { horizon, gate, safe_check_period: 1, init: InitQ::Zero }
    }

    fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.safe_check_period == 0 {
            return Err(Error::InvalidArgument("gate check period must be at least 1".into()));
        }
        if let InitQ::Constant(c) = self.init {
            if !c.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "initial constant must be finite, got {c}"
                )));
            }
        }
        if let InitQ::Table(t) = &self.init {
            mdp.check_shape(t)?;
        }
        Ok(())
    }

    fn initial_q(&self, mdp: &Mdp) -> QTable {
        match &self.init {
            InitQ::Zero => QTable::zeros(mdp.n_states(), mdp.n_actions()),
            InitQ::Constant(c) => QTable::constant(mdp.n_states(), mdp.n_actions(), *c),
            InitQ::Table(t) => t.clone(),
        }
    }
}

/// Outcome of one gate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeConditionDecision {
    pub transfer: bool,
    pub source_mnbe: f64,
    pub current_mnbe: f64,
}

/// Compare Bellman residuals of a source table and the current iterate on
/// `mdp`. Transfers on ties, so an exact fixed point always wins.
pub fn safe_condition(q_source: &QTable, q_current: &QTable, mdp: &Mdp) -> Result<SafeConditionDecision> {
    let source_mnbe = metrics::mnbe_exact(q_source, mdp)?;
    let current_mnbe = metrics::mnbe_exact(q_current, mdp)?;
    Ok(SafeConditionDecision { transfer: source_mnbe <= current_mnbe, source_mnbe, current_mnbe })
}

/// One synchronous update with step size `1/(t + 1)` (`t` counts from 1): for
/// every pair, draw one next state and move toward
/// `r + gamma * max_a q_target(s', a)`. Pairs update in `(s, a)` row-major
/// order, one draw each; the target's state values are fixed before the sweep,
/// so the sweep reads no partially updated entries.
pub fn ttql_step(
    q: &mut QTable,
    q_target: &QTable,
    mdp: &Mdp,
    t: usize,
    rng: &mut DetRng,
) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidArgument("steps are counted from 1".into()));
    }
    mdp.check_shape(q)?;
    mdp.check_shape(q_target)?;
    let v_target = q_target.state_values();
    sweep(q, &v_target, mdp, t, rng)
}

fn sweep(q: &mut QTable, v_target: &[f64], mdp: &Mdp, t: usize, rng: &mut DetRng) -> Result<()> {
    let alpha = 1.0 / (t as f64 + 1.0);
    let gamma = mdp.gamma();
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let next = mdp.sample_next_state(s, a, rng)?;
            let sample = mdp.reward(s, a) + gamma * v_target[next];
            q.set(s, a, (1.0 - alpha) * q.get(s, a) + alpha * sample);
        }
    }
    Ok(())
}

/// One step of the learner's trace, recorded before the step's update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Step index, counted from 1.
    pub step: usize,
    /// Sup-norm error of the pre-update iterate.
    pub mne: f64,
    /// Sup-norm Bellman residual of the pre-update iterate.
    pub mnbe: f64,
    /// Whether this step bootstrapped from the source.
    pub transfer: bool,
    /// Gate statistic: source residual over current residual (error ratio for
    /// the oracle gate); 1 when the policy never transfers. A zero numerator
    /// over a zero denominator reads as 1, a positive one as infinity.
    pub beta_hat: f64,
    /// Step size used by this step, `1/(step + 1)`.
    pub alpha: f64,
}

/// Full learning run: one row per step plus the post-horizon iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub steps: Vec<TraceRow>,
    pub final_q: QTable,
}

fn gate_ratio(source: f64, current: f64) -> f64 {
    if current > 0.0 {
        source / current
    } else if source == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// One fused pass over every pair: the exact Bellman residual max of `q`, and
/// a sampled next state per pair written to `sampled`, consuming one uniform
/// per pair in `(s, a)` row-major order.
///
/// Walks the grouped transition layout once, so the expectation, the running
/// prefix sum, and the draw comparison all come from a single read of each
/// probability. Per pair the expectation folds left to right with
/// `f64::mul_add`, matching [`metrics::mnbe_with_state_values`] bit for bit,
/// and the prefix sums repeat the construction-time additions of
/// [`Mdp::sample_next_state`]'s table add for add, so the sampled index is
/// exactly the one that call would return for the same draw.
fn residuals_and_samples(
    mdp: &Mdp,
    q: &QTable,
    v: &[f64],
    rng: &mut DetRng,
    sampled: &mut [usize],
) -> f64 {
    use rand::Rng;
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let reward = mdp.reward_table();
    let qv = q.values();
    let blocked = mdp.blocked_transitions();
    let pair_count = qv.len();
    let mut worst = 0.0f64;
    for g in 0..pair_count.div_ceil(8) {
        let base = g * 8;
        let lanes = (pair_count - base).min(8);
        let mut u = [0.0f64; 8];
        for lane in u.iter_mut().take(lanes) {
            *lane = rng.random();
        }
        let group = &blocked[g * 8 * n..(g + 1) * 8 * n];
        let mut acc = [0.0f64; 8];
        let mut run = [0.0f64; 8];
        let mut cnt = [0.0f64; 8];
        for (row8, &vj) in group.chunks_exact(8).zip(v) {
            for r in 0..8 {
                acc[r] = row8[r].mul_add(vj, acc[r]);
                run[r] += row8[r];
                cnt[r] += if run[r] <= u[r] { 1.0 } else { 0.0 };
            }
        }
        for r in 0..lanes {
            let p = base + r;
            let residual = (qv[p] - (reward[p] + gamma * acc[r])).abs();
            if residual > worst {
                worst = residual;
            }
            let idx = cnt[r] as usize;
            sampled[p] = if idx < n {
                idx
            } else {
                // roundoff pushed the draw past the final prefix sum; same
                // fallback as sample_next_state
                let row = &mdp.transition_table()[p * n..(p + 1) * n];
                row.iter().rposition(|&x| x > 0.0).unwrap_or(n - 1)
            };
        }
    }
    worst
}

/// Run the learner for `cfg.horizon` steps.
///
/// `q_star` is used only for the trace's error column. Policies other than
/// [`GatePolicy::NeverTransfer`] require a source table. The loop is
/// arithmetically identical to calling [`safe_condition`] (on gate steps) and
/// [`ttql_step`] in sequence; it is fused here so the residual pass and the
/// sampling pass share one read of the transition table per step.
pub fn run(
    mdp: &Mdp,
    q_source: Option<&QTable>,
    q_star: &QTable,
    cfg: &LearnerConfig,
    rng: &mut DetRng,
) -> Result<RunTrace> {
    cfg.validate(mdp)?;
    mdp.check_shape(q_star)?;
    let source = match (cfg.gate.needs_source(), q_source) {
        (true, Some(s)) => {
            mdp.check_shape(s)?;
            Some(s)
        }
        (true, None) => {
            return Err(Error::InvalidArgument(format!(
                "gate policy '{}' needs a source table",
                cfg.gate.name()
            )));
        }
        (false, _) => None,
    };

    // source statistics are constants of the run
    let (v_src, source_mnbe, source_mne) = match source {
        Some(s) => {
            let v = s.state_values();
            let res = metrics::mnbe_with_state_values(s, mdp, &v);
            let err = metrics::mne(s, q_star)?;
            (v, res, err)
        }
        None => (Vec::new(), 0.0, 0.0),
    };

    let mut q = cfg.initial_q(mdp);
    let mut v_cur = vec![0.0; mdp.n_states()];
    let mut sampled = vec![0usize; mdp.n_states() * mdp.n_actions()];
    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut held_transfer = false;
    for t in 1..=cfg.horizon {
        q.state_values_into(&mut v_cur);
        let mne_t = q.sup_diff(q_star)?;
        let mnbe_t = residuals_and_samples(mdp, &q, &v_cur, rng, &mut sampled);
        if (t - 1) % cfg.safe_check_period == 0 {
            held_transfer = match cfg.gate {
                GatePolicy::AlwaysTransfer => true,
                GatePolicy::NeverTransfer => false,
                GatePolicy::BellmanGate => source_mnbe <= mnbe_t,
                GatePolicy::OracleErrorRatio => source_mne <= mne_t,
            };
        }
        let beta_hat = match cfg.gate {
            GatePolicy::NeverTransfer => 1.0,
            GatePolicy::OracleErrorRatio => gate_ratio(source_mne, mne_t),
            _ => gate_ratio(source_mnbe, mnbe_t),
        };
        steps.push(TraceRow {
            step: t,
            mne: mne_t,
            mnbe: mnbe_t,
            transfer: held_transfer,
            beta_hat,
            alpha: 1.0 / (t as f64 + 1.0),
        });
        let v_target = if held_transfer { &v_src } else { &v_cur };
        // same update expression as `sweep`, applied to the pre-drawn samples
        let alpha = 1.0 / (t as f64 + 1.0);
        let gamma = mdp.gamma();
        let reward = mdp.reward_table();
        for ((val, &next), &r) in q.values_mut().iter_mut().zip(&sampled).zip(reward) {
            let sample = r + gamma * v_target[next];
            *val = (1.0 - alpha) * *val + alpha * sample;
        }
    }
    Ok(RunTrace { steps, final_q: q })
}
