//! Property checks over randomized shapes: operator laws, bound dominance,
//! round trips, and determinism, with the structure driven by proptest.

use proptest::prelude::*;
use rand::Rng;
use ttql::config::{ExperimentConfig, SuiteKind};
use ttql::mdp::QTable;
use ttql::metrics;
use ttql::rng::{rng_from_seed, DetRng};
use ttql::solver::{mdp_distance, solve_q_star};
use ttql::synth::{component_distance_bound, component_distance_bound_min, perturb, random_mdp, PerturbAxis, PerturbSpec};

fn table_from_rng(ns: usize, na: usize, scale: f64, rng: &mut DetRng) -> QTable {
    let values = (0..ns * na).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect();
    QTable::from_values(ns, na, values).unwrap()
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=12, 1usize..=6)
}

fn axis() -> impl Strategy<Value = PerturbAxis> {
    prop_oneof![
        Just(PerturbAxis::Gamma),
        Just(PerturbAxis::Reward),
        Just(PerturbAxis::Transition),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // The optimal Bellman operator contracts by exactly gamma in sup norm.
    #[test]
    fn bellman_contracts_pairs_of_tables(
        (ns, na) in shape(),
        gamma in 0.05f64..=0.95,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = rng_from_seed(seed);
        let mdp = random_mdp(ns, na, gamma, &mut rng).unwrap();
        let scale = 1.0 / (1.0 - gamma);
        let q1 = table_from_rng(ns, na, scale, &mut rng);
        let q2 = table_from_rng(ns, na, scale, &mut rng);
        let lhs = mdp.bellman_optimal(&q1).unwrap().sup_diff(&mdp.bellman_optimal(&q2).unwrap()).unwrap();
        let rhs = gamma * q1.sup_diff(&q2).unwrap();
        // adversarial tables can push the comparison past the mathematical
        // bound by the dot products' accumulated rounding, which scales with
        // the row length and the value magnitudes rather than with rhs
        let slack = gamma * 8.0 * ns as f64 * f64::EPSILON * q1.sup_norm().max(q2.sup_norm()).max(1.0);
        prop_assert!(lhs <= rhs + slack, "contraction violated: {lhs} > {rhs} + {slack}");
    }

    // Entrywise order is preserved by the operator.
    #[test]
    fn bellman_is_monotone(
        (ns, na) in shape(),
        gamma in 0.05f64..=0.95,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = rng_from_seed(seed);
        let mdp = random_mdp(ns, na, gamma, &mut rng).unwrap();
        let lo = table_from_rng(ns, na, 5.0, &mut rng);
        let bump: Vec<f64> = (0..ns * na).map(|_| rng.random::<f64>()).collect();
        let hi = QTable::from_values(
            ns,
            na,
            lo.values().iter().zip(&bump).map(|(x, b)| x + b).collect(),
        ).unwrap();
        let t_lo = mdp.bellman_optimal(&lo).unwrap();
        let t_hi = mdp.bellman_optimal(&hi).unwrap();
        for (x, y) in t_lo.values().iter().zip(t_hi.values()) {
            prop_assert!(x <= y, "monotonicity violated: {x} > {y}");
        }
    }

    // The sampled index is in range and carries positive probability, and a
    // cloned stream reproduces it.
    #[test]
    fn sampling_stays_on_the_support(
        (ns, na) in shape(),
        gamma in 0.05f64..=0.95,
        seed in 0u64..1 << 48,
    ) {
        let mdp = random_mdp(ns, na, gamma, &mut rng_from_seed(seed)).unwrap();
        let mut rng = rng_from_seed(seed ^ 0x9e37);
        let mut replay = rng_from_seed(seed ^ 0x9e37);
        for s in 0..ns {
            for a in 0..na {
                let idx = mdp.sample_next_state(s, a, &mut rng).unwrap();
                prop_assert!(idx < ns);
                prop_assert!(mdp.transition(s, a, idx) > 0.0);
                prop_assert_eq!(idx, mdp.sample_next_state(s, a, &mut replay).unwrap());
            }
        }
    }

    // Harmonic partial sums stay under their log bound.
    #[test]
    fn harmonic_sums_stay_bounded(a in 1usize..5000, gap in 0usize..5000) {
        prop_assert!(ttql::bounds::harmonic_sum_bound_holds(a, a + gap).unwrap());
    }

    // Weight profiles: w_0 is exactly 1/n, the initial-error weight is the
    // last entry, every weight is at least 1/n, and a plain-product oracle
    // agrees to high relative accuracy at small n.
    #[test]
    fn weight_profiles_match_a_direct_product_oracle(
        n in 1usize..=60,
        gamma in 0.0f64..=0.99,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = rng_from_seed(seed);
        let beta: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>()).collect();
        let profile = ttql::bounds::weights(n, gamma, &beta).unwrap();
        prop_assert_eq!(profile.weights[0], 1.0 / n as f64);
        prop_assert_eq!(profile.alpha_n, profile.weights[n - 1]);
        let floor = 1.0 / n as f64 * (1.0 - 1e-12);
        for &w in &profile.weights {
            prop_assert!(w >= floor);
        }
        let mut sq = 0.0;
        for k in 0..n {
            let mut w = 1.0 / n as f64;
            for i in n - k..n {
                w *= 1.0 + gamma * beta[i - 1] / i as f64;
            }
            prop_assert!((w - profile.weights[k]).abs() <= 1e-11 * w.max(1.0));
            sq += w * w;
        }
        prop_assert!((sq - profile.weight_sq_sum).abs() <= 1e-10 * sq.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // MNE and MNBE pinch each other through the discount factor.
    #[test]
    fn error_sandwich_holds_around_the_certified_oracle(
        (ns, na) in shape(),
        gamma in 0.05f64..=0.9,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = rng_from_seed(seed);
        let mdp = random_mdp(ns, na, gamma, &mut rng).unwrap();
        let q_star = solve_q_star(&mdp, 1e-11).unwrap().q_star;
        let q = table_from_rng(ns, na, 1.0 / (1.0 - gamma), &mut rng);
        let mne = metrics::mne(&q, &q_star).unwrap();
        let mnbe = metrics::mnbe_exact(&q, &mdp).unwrap();
        // the oracle itself is off by at most 1e-11, diluted by 1 +/- gamma
        prop_assert!((1.0 - gamma) * mne <= mnbe + 1e-9, "{mne} vs {mnbe}");
        prop_assert!(mnbe <= (1.0 + gamma) * mne + 1e-9, "{mnbe} vs {mne}");
    }

    // The closed-form distance bound dominates the solved distance on
    // single-axis perturbed pairs, and the orientation-minimized variant
    // never exceeds the direct one.
    #[test]
    fn distance_bound_dominates_perturbed_pairs(
        (ns, na) in shape(),
        gamma in 0.1f64..=0.9,
        which in axis(),
        eps in 0.0f64..=0.4,
        seed in 0u64..1 << 48,
    ) {
        prop_assume!(which != PerturbAxis::Gamma || gamma - eps > 1e-6);
        let mut rng = rng_from_seed(seed);
        let m1 = random_mdp(ns, na, gamma, &mut rng).unwrap();
        let spec = PerturbSpec::new(which, eps).unwrap();
        let m2 = perturb(&m1, &spec, &mut rng).unwrap();
        let d = mdp_distance(&m1, &m2, 1e-11).unwrap();
        let direct = component_distance_bound(&m1, &m2).unwrap();
        let tight = component_distance_bound_min(&m1, &m2).unwrap();
        prop_assert!(d <= direct.total + 2e-8, "{d} > {}", direct.total);
        prop_assert!(d <= tight.total + 2e-8, "{d} > {}", tight.total);
        prop_assert!(tight.total <= direct.total);
    }

    // The solver's certificate is checkable from outside: one more Bellman
    // application moves the answer by at most (1 + gamma) times the reported
    // residual, and the guaranteed error formula matches it.
    #[test]
    fn solver_certificates_validate(
        (ns, na) in shape(),
        gamma in 0.05f64..=0.9,
        tol_exp in 6i32..11,
        seed in 0u64..1 << 48,
    ) {
        let mdp = random_mdp(ns, na, gamma, &mut rng_from_seed(seed)).unwrap();
        let tol = 10f64.powi(-tol_exp);
        let report = solve_q_star(&mdp, tol).unwrap();
        prop_assert!(report.guaranteed_mne <= tol);
        prop_assert_eq!(report.guaranteed_mne, report.residual * (gamma / (1.0 - gamma)));
        let reapplied = mdp.bellman_optimal(&report.q_star).unwrap();
        let movement = reapplied.sup_diff(&report.q_star).unwrap();
        prop_assert!(movement <= (1.0 + gamma) * report.residual, "{movement} vs residual {}", report.residual);
    }

    // Canonical text form of a config is a parse fixed point.
    #[test]
    fn config_canonical_text_round_trips(
        kind in prop_oneof![
            Just(SuiteKind::Similarity),
            Just(SuiteKind::SafeCondition),
            Just(SuiteKind::BoundsVerify),
            Just(SuiteKind::Custom),
        ],
        dims in (1usize..=40, 1usize..=40),
        gamma0 in 0.05f64..=0.95,
        horizon in 1usize..=5000,
        seeds in 1usize..=10,
        period in 1usize..=7,
        specs in proptest::collection::vec((axis(), 0.0f64..=0.4), 1..4),
    ) {
        let mut cfg = ExperimentConfig::default_for(kind);
        cfg.n_states = dims.0;
        cfg.n_actions = dims.1;
        cfg.gamma0 = gamma0;
        cfg.horizon = horizon;
        cfg.seeds = seeds;
        cfg.safe_check_period = period;
        if kind != SuiteKind::BoundsVerify {
            cfg.perturbations = specs
                .iter()
                .map(|&(a, e)| PerturbSpec::new(a, e).unwrap())
                .collect();
        }
        let text = cfg.canonical();
        let reparsed: ExperimentConfig = text.parse().unwrap();
        prop_assert_eq!(&reparsed, &cfg);
        prop_assert_eq!(reparsed.canonical(), text);
    }
}
