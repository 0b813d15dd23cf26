//! Averaging weights induced by the 1/(t+1) step size, closed-form bounds on
//! their decay, and the finite-sample error bound they imply.

use crate::error::{Error, Result};
use crate::rng::DetRng;
use rand::Rng;

/// Weights of the last `n` noise terms in the value iterate after `n` steps.
///
/// With step size `alpha_t = 1/(t+1)` and per-step contraction factors
/// `gamma * beta_t`, the term injected at step `n - k` carries weight
///
/// ```text
/// w_k = (1/n) * prod_{i=n-k}^{n-1} (1 + gamma * beta_i / i)
/// ```
///
/// so `w_0 = 1/n` and `alpha_n = w_{n-1}` is the weight on the initial error.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    pub n: usize,
    /// `weights[k] = w_k`, length `n`.
    pub weights: Vec<f64>,
    /// Weight on the initial error, `w_{n-1}`.
    pub alpha_n: f64,
    /// `sum_k w_k^2`, accumulated left to right.
    pub weight_sq_sum: f64,
}

/// Compute the weight profile for `n` steps.
///
/// `beta` holds the factors `beta_1 .. beta_{n-1}` (so its length is `n - 1`);
/// entries must be nonnegative. The products are evaluated as exponentials of
/// compensated `ln_1p` sums so that `n` in the tens of thousands stays
/// accurate to roundoff.
pub fn weights(n: usize, gamma: f64, beta: &[f64]) -> Result<WeightProfile> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "contraction factor must be finite and nonnegative, got {gamma}"
        )));
    }
    if beta.len() != n - 1 {
        return Err(Error::ShapeMismatch(format!(
            "expected {} per-step factors for {} steps, got {}",
            n - 1,
            n,
            beta.len()
        )));
    }
    if let Some(b) = beta.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "per-step factors must be nonnegative, got {b}"
        )));
    }

    let inv_n = 1.0 / n as f64;
    let mut weights = Vec::with_capacity(n);
    weights.push(inv_n);
    // grow the suffix sum of ln(1 + gamma * beta_i / i) downward from i = n - 1
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 1..n {
        let i = n - k;
        let term = (gamma * beta[i - 1] / i as f64).ln_1p();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        weights.push(sum.exp() * inv_n);
    }
    let alpha_n = weights[n - 1];
    let weight_sq_sum = weights.iter().map(|w| w * w).sum();
    Ok(WeightProfile { n, weights, alpha_n, weight_sq_sum })
}

fn check_regime(gamma_beta_star: f64) -> Result<()> {
    if !(gamma_beta_star >= 0.0) || gamma_beta_star >= 1.0 {
        return Err(Error::OutOfRegime(format!(
            "decay bounds need gamma * beta_star in [0, 1), got {gamma_beta_star}"
        )));
    }
    Ok(())
}

/// Closed-form upper bound on `sum_k w_k^2` when every per-step factor is at
/// most `beta_star`. Needs `n >= 3` and `gamma * beta_star < 1`.
pub fn weight_sq_sum_bound(n: usize, gamma_beta_star: f64) -> Result<f64> {
    check_regime(gamma_beta_star)?;
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "squared-sum bound needs at least 3 steps, got {n}"
        )));
    }
    let gb = gamma_beta_star;
    let nf = n as f64;
    if gb == 0.5 {
        Ok(((nf - 2.0).powf(2.0 * gb) / (nf * nf)) * (2.0 * gb).exp() * (1.0 + nf.ln()))
    } else {
        let p = 1.0 - 2.0 * gb;
        Ok((2.0 * gb).exp() / nf.powf(2.0 - 2.0 * gb) * (nf.powf(p) / p - 1.0 / p + 1.0))
    }
}

/// Closed-form upper bound on `alpha_n = w_{n-1}` under the same regime:
/// `(1 + gb) * exp((1/2 - ln 2) * gb) / n^(1 - gb)`.
pub fn alpha_bound(n: usize, gamma_beta_star: f64) -> Result<f64> {
    check_regime(gamma_beta_star)?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let gb = gamma_beta_star;
    let c1 = (1.0 + gb) * ((0.5 - std::f64::consts::LN_2) * gb).exp();
    Ok(c1 / (n as f64).powf(1.0 - gb))
}

/// High-probability error bound after `n` steps: the initial error `e1`
/// decayed by `alpha_n`, plus the Hoeffding deviation of the weighted noise
/// sum at confidence `1 - delta`.
pub fn error_bound(n: usize, e1: f64, delta: f64, gamma: f64, beta: &[f64]) -> Result<f64> {
    if !(e1 >= 0.0 && e1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "initial error must be finite and nonnegative, got {e1}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence parameter must lie in (0, 1], got {delta}"
        )));
    }
    let profile = weights(n, gamma, beta)?;
    Ok(profile.alpha_n * e1 + ((1.0 / delta).ln() * profile.weight_sq_sum / 2.0).sqrt())
}

/// Measured decay quantities next to their closed-form bounds, for one grid
/// point of the verification sweep.
#[derive(Debug, Clone)]
pub struct BoundProfile {
    pub n: usize,
    pub gamma_beta_star: f64,
    pub weight_sq_sum: f64,
    pub weight_sq_sum_bound: f64,
    pub alpha: f64,
    pub alpha_bound: f64,
}

impl BoundProfile {
    pub fn sum_ok(&self) -> bool {
        self.weight_sq_sum <= self.weight_sq_sum_bound
    }
    pub fn alpha_ok(&self) -> bool {
        self.alpha <= self.alpha_bound
    }
}

/// Evaluate the exact weights at the worst case `beta_t = beta_star` and
/// compare against both closed forms. The weights depend on `gamma` and
/// `beta_star` only through their product, so the product is the whole
/// parameterization here.
pub fn bound_profile(n: usize, gamma_beta_star: f64) -> Result<BoundProfile> {
    check_regime(gamma_beta_star)?;
    let beta = vec![1.0; n - 1];
    let profile = weights(n, gamma_beta_star, &beta)?;
    Ok(BoundProfile {
        n,
        gamma_beta_star,
        weight_sq_sum: profile.weight_sq_sum,
        weight_sq_sum_bound: weight_sq_sum_bound(n, gamma_beta_star)?,
        alpha: profile.alpha_n,
        alpha_bound: alpha_bound(n, gamma_beta_star)?,
    })
}

/// Grid for the verification sweep: profile lengths crossed with products
/// straddling the regime change at 1/2.
pub const VERIFY_GRID_N: [usize; 3] = [100, 1_000, 10_000];
pub const VERIFY_GRID_GB: [f64; 7] = [0.1, 0.3, 0.49, 0.5, 0.51, 0.7, 0.9];

/// Sweep [`bound_profile`] over the whole grid and render the outcomes as
/// CSV. Returns the report together with the number of violated
/// inequalities, which callers turn into an exit status.
pub fn verify_grid() -> Result<(String, usize)> {
    let mut csv = String::from(
        "n,gamma_beta_star,weight_sq_sum,weight_sq_sum_bound,alpha,alpha_bound,sum_ok,alpha_ok\n",
    );
    let mut violations = 0usize;
    for &n in &VERIFY_GRID_N {
        for &gb in &VERIFY_GRID_GB {
            let p = bound_profile(n, gb)?;
            violations += usize::from(!p.sum_ok()) + usize::from(!p.alpha_ok());
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.n,
                p.gamma_beta_star,
                p.weight_sq_sum,
                p.weight_sq_sum_bound,
                p.alpha,
                p.alpha_bound,
                u8::from(p.sum_ok()),
                u8::from(p.alpha_ok())
            ));
        }
    }
    Ok((csv, violations))
}

/// Confidence levels exercised by the Monte Carlo tail check.
pub const HOEFFDING_DELTAS: [f64; 3] = [0.1, 0.05, 0.01];

/// Tail-frequency estimate for one confidence level.
#[derive(Debug, Clone, Copy)]
pub struct HoeffdingOutcome {
    pub delta: f64,
    /// One-sided deviation threshold `sqrt(ln(1/delta) * sum w^2 / 2)`.
    pub threshold: f64,
    pub trials: usize,
    /// Trials whose centered weighted sum exceeded the threshold.
    pub exceed_count: usize,
}

impl HoeffdingOutcome {
    pub fn rate(&self) -> f64 {
        self.exceed_count as f64 / self.trials as f64
    }
    /// Binomial standard deviation of the rate estimate at `p = delta`.
    pub fn rate_sigma(&self) -> f64 {
        (self.delta * (1.0 - self.delta) / self.trials as f64).sqrt()
    }
}

/// Estimate, for each confidence level, how often `sum_k w_k (u_k - 1/2)`
/// with `u_k` uniform on [0, 1) exceeds the Hoeffding threshold. Each rate
/// must come out at most `delta` up to binomial noise; `trials` below 10^4
/// is rejected as too coarse to resolve the 0.01 level.
pub fn hoeffding_check(
    profile: &WeightProfile,
    trials: usize,
    rng: &mut DetRng,
) -> Result<Vec<HoeffdingOutcome>> {
    if trials < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10000 trials to resolve the smallest confidence level, got {trials}"
        )));
    }
    let thresholds: Vec<f64> = HOEFFDING_DELTAS
        .iter()
        .map(|d| ((1.0 / d).ln() * profile.weight_sq_sum / 2.0).sqrt())
        .collect();
    let mut exceed = [0usize; 3];
    for _ in 0..trials {
        let mut dev = 0.0;
        for &w in &profile.weights {
            dev += w * (rng.random::<f64>() - 0.5);
        }
        for (e, t) in exceed.iter_mut().zip(&thresholds) {
            *e += usize::from(dev > *t);
        }
    }
    Ok(HOEFFDING_DELTAS
        .iter()
        .zip(thresholds)
        .zip(exceed)
        .map(|((&delta, threshold), exceed_count)| HoeffdingOutcome {
            delta,
            threshold,
            trials,
            exceed_count,
        })
        .collect())
}

/// Check `sum_{i=a}^{b} 1/i <= 1/a + ln b - ln a` for `1 <= a <= b`.
pub fn harmonic_sum_bound_holds(a: usize, b: usize) -> Result<bool> {
    if a == 0 || b < a {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= a <= b, got a = {a}, b = {b}"
        )));
    }
    let sum: f64 = (a..=b).map(|i| 1.0 / i as f64).sum();
    // grouping the log difference keeps the a == b case an exact equality
    Ok(sum <= 1.0 / a as f64 + ((b as f64).ln() - (a as f64).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    /// Direct product evaluation, one running product per weight.
    fn weights_naive(n: usize, gamma: f64, beta: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let mut prod = 1.0;
                for i in (n - k)..n {
                    prod *= (i as f64 + gamma * beta[i - 1]) / i as f64;
                }
                prod / n as f64
            })
            .collect()
    }

    fn assert_close_rel(a: f64, b: f64, rel: f64) {
        let scale = a.abs().max(b.abs()).max(1e-300);
        assert!((a - b).abs() / scale <= rel, "{a} vs {b}");
    }

    #[test]
    fn single_step_profile_is_trivial() {
        let p = weights(1, 0.9, &[]).unwrap();
        assert_eq!(p.weights, vec![1.0]);
        assert_eq!(p.alpha_n, 1.0);
        assert_eq!(p.weight_sq_sum, 1.0);
    }

    #[test]
    fn zero_factors_reduce_to_uniform_averaging() {
        let n = 257;
        let p = weights(n, 0.9, &vec![0.0; n - 1]).unwrap();
        for &w in &p.weights {
            assert_eq!(w, 1.0 / n as f64);
        }
        assert_eq!(p.alpha_n, 1.0 / n as f64);
        assert_close_rel(p.weight_sq_sum, 1.0 / n as f64, 1e-13);
    }

    #[test]
    fn matches_naive_products_with_varied_factors() {
        let n = 100;
        let mut rng = rng_from_seed(3);
        let beta: Vec<f64> = (0..n - 1).map(|_| rand::Rng::random::<f64>(&mut rng) * 1.2).collect();
        let p = weights(n, 0.85, &beta).unwrap();
        let naive = weights_naive(n, 0.85, &beta);
        for (a, b) in p.weights.iter().zip(&naive) {
            assert_close_rel(*a, *b, 1e-12);
        }
    }

    #[test]
    fn matches_naive_products_at_large_n() {
        let n = 10_000;
        let beta = vec![1.0; n - 1];
        let p = weights(n, 0.9, &beta).unwrap();
        let naive = weights_naive(n, 0.9, &beta);
        for (a, b) in p.weights.iter().zip(&naive) {
            assert_close_rel(*a, *b, 1e-12);
        }
        assert_eq!(p.alpha_n, p.weights[n - 1]);
    }

    #[test]
    fn rejects_bad_shapes_and_factors() {
        assert!(weights(0, 0.9, &[]).is_err());
        assert!(weights(5, 0.9, &[1.0; 3]).is_err());
        assert!(weights(3, 0.9, &[1.0, -0.1]).is_err());
        assert!(weights(3, f64::NAN, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn closed_forms_dominate_measured_decay() {
        for &(n, gb) in &[(100usize, 0.3f64), (1000, 0.5), (500, 0.7), (128, 0.49), (128, 0.51)] {
            let prof = bound_profile(n, gb).unwrap();
            assert!(prof.sum_ok(), "n={n} gb={gb}: {} > {}", prof.weight_sq_sum, prof.weight_sq_sum_bound);
            assert!(prof.alpha_ok(), "n={n} gb={gb}: {} > {}", prof.alpha, prof.alpha_bound);
        }
    }

    #[test]
    fn bounds_collapse_to_exact_values_without_contraction() {
        let n = 1000;
        assert_close_rel(weight_sq_sum_bound(n, 0.0).unwrap(), 1.0 / n as f64, 1e-12);
        assert_eq!(alpha_bound(n, 0.0).unwrap(), 1.0 / n as f64);
    }

    #[test]
    fn bounds_reject_the_unit_product_regime() {
        assert!(matches!(weight_sq_sum_bound(100, 1.0), Err(Error::OutOfRegime(_))));
        assert!(matches!(alpha_bound(100, 1.2), Err(Error::OutOfRegime(_))));
        assert!(weight_sq_sum_bound(2, 0.5).is_err());
    }

    #[test]
    fn error_bound_drops_the_noise_term_at_full_confidence() {
        let n = 50;
        let beta = vec![1.0; n - 1];
        let profile = weights(n, 0.9, &beta).unwrap();
        let b = error_bound(n, 2.0, 1.0, 0.9, &beta).unwrap();
        assert_close_rel(b, profile.alpha_n * 2.0, 1e-14);
        // tighter confidence never shrinks the bound
        let b_mid = error_bound(n, 2.0, 0.1, 0.9, &beta).unwrap();
        let b_tight = error_bound(n, 2.0, 0.01, 0.9, &beta).unwrap();
        assert!(b <= b_mid && b_mid <= b_tight);
    }

    #[test]
    fn error_bound_validates_inputs() {
        assert!(error_bound(10, -1.0, 0.5, 0.9, &[1.0; 9]).is_err());
        assert!(error_bound(10, 1.0, 0.0, 0.9, &[1.0; 9]).is_err());
        assert!(error_bound(10, 1.0, 1.5, 0.9, &[1.0; 9]).is_err());
    }

    #[test]
    fn tail_rates_stay_under_their_levels() {
        let profile = weights(200, 0.9, &vec![1.0; 199]).unwrap();
        let outcomes = hoeffding_check(&profile, 20_000, &mut rng_from_seed(44)).unwrap();
        assert_eq!(outcomes.len(), 3);
        for o in &outcomes {
            assert!(
                o.rate() <= o.delta + 4.0 * o.rate_sigma(),
                "delta {}: rate {}",
                o.delta,
                o.rate()
            );
        }
        // the outcome is a pure function of the profile, trial count, and stream
        let again = hoeffding_check(&profile, 20_000, &mut rng_from_seed(44)).unwrap();
        for (a, b) in outcomes.iter().zip(&again) {
            assert_eq!(a.exceed_count, b.exceed_count);
        }
    }

    #[test]
    fn tail_check_rejects_coarse_trial_counts() {
        let profile = weights(10, 0.9, &vec![1.0; 9]).unwrap();
        assert!(hoeffding_check(&profile, 9_999, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn harmonic_tail_bound_holds_on_a_dense_sweep() {
        for a in 1..=200usize {
            let mut sum = 0.0f64;
            for b in a..=2000 {
                sum += 1.0 / b as f64;
                let bound = 1.0 / a as f64 + ((b as f64).ln() - (a as f64).ln());
                assert!(sum <= bound, "a={a} b={b}: {sum} > {bound}");
            }
        }
        assert!(harmonic_sum_bound_holds(1, 1_000_000).unwrap());
        assert!(harmonic_sum_bound_holds(17, 123_456).unwrap());
        assert!(harmonic_sum_bound_holds(5, 5).unwrap());
        assert!(harmonic_sum_bound_holds(0, 3).is_err());
        assert!(harmonic_sum_bound_holds(4, 3).is_err());
    }
}
