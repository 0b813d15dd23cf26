//! Experiment suites: run a family of learner variants against one base MDP
//! with paired noise streams, and write traces, summaries, quantile curves,
//! and a manifest that pins the whole run.

use crate::config::{ExperimentConfig, SuiteKind};
use crate::error::{Error, Result};
use crate::learner::{GatePolicy, InitQ, LearnerConfig, RunTrace};
use crate::mdp::{Mdp, QTable};
use crate::rng::{substream, DetRng};
use crate::solver::solve_q_star;
use crate::synth::{perturb, random_mdp, PerturbSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// All suite randomness hangs off this one seed; reruns of the same config
/// are bit-identical.
pub const MASTER_SEED: u64 = 0;

/// Solver tolerance for the optimal tables behind every suite.
pub const SUITE_SOLVE_TOL: f64 = 1e-10;

// stream tags under the master seed
const TAG_BASE: u64 = 1;
const TAG_PERTURB: u64 = 2;
const TAG_RUN: u64 = 3;

/// One learner variant of a suite.
#[derive(Debug, Clone)]
pub struct VariantPlan {
    pub label: String,
    /// Index into the config's perturbation list; `None` learns from scratch.
    pub source: Option<usize>,
    pub gate: GatePolicy,
}

/// Per-variant outcome across seeds.
#[derive(Debug, Clone)]
pub struct VariantResult {
    pub label: String,
    pub spec: Option<PerturbSpec>,
    pub gate: GatePolicy,
    /// Sup-norm distance between the base and source optimal tables
    /// (0 for the baseline).
    pub distance: f64,
    /// Final error per seed, in seed order.
    pub finals: Vec<f64>,
    /// Sum of the per-step error curve per seed.
    pub aucs: Vec<f64>,
    pub median_final: f64,
    pub q25_final: f64,
    pub q75_final: f64,
}

#[derive(Debug)]
pub struct SuiteResult {
    pub suite: SuiteKind,
    pub config_sha256: String,
    pub variants: Vec<VariantResult>,
}

#[derive(Serialize)]
struct Manifest {
    version: String,
    suite: String,
    config_sha256: String,
    master_seed: u64,
    seeds: Vec<u64>,
    variants: Vec<String>,
}

/// Interpolating quantile (linear between order statistics) of an unsorted
/// sample; `p` in [0, 1].
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty() && (0.0..=1.0).contains(&p));
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let h = (xs.len() as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(xs.len() - 1);
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// The variant list a config expands to: a from-scratch baseline, then one
/// gated variant per source (similarity and custom) or a gated/ungated pair
/// per source (safe-condition). The bounds-verify suite runs no learners and
/// expands to nothing.
pub fn plan_variants(cfg: &ExperimentConfig) -> Vec<VariantPlan> {
    if cfg.suite == SuiteKind::BoundsVerify {
        return Vec::new();
    }
    let mut plans = vec![VariantPlan {
        label: "baseline".to_string(),
        source: None,
        gate: GatePolicy::NeverTransfer,
    }];
    match cfg.suite {
        SuiteKind::Similarity | SuiteKind::Custom => {
            for (i, p) in cfg.perturbations.iter().enumerate() {
                plans.push(VariantPlan {
                    label: p.label(),
                    source: Some(i),
                    gate: GatePolicy::BellmanGate,
                });
            }
        }
        SuiteKind::SafeCondition => {
            for (i, p) in cfg.perturbations.iter().enumerate() {
                plans.push(VariantPlan {
                    label: format!("{}-gated", p.label()),
                    source: Some(i),
                    gate: GatePolicy::BellmanGate,
                });
                plans.push(VariantPlan {
                    label: format!("{}-always", p.label()),
                    source: Some(i),
                    gate: GatePolicy::AlwaysTransfer,
                });
            }
        }
        SuiteKind::BoundsVerify => {}
    }
    plans
}

pub fn config_sha256(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_trace_csv(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,mne,mnbe,transfer_flag,beta_hat,alpha")?;
    for row in &trace.steps {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.step,
            row.mne,
            row.mnbe,
            u8::from(row.transfer),
            row.beta_hat,
            row.alpha
        )?;
    }
    Ok(())
}

/// Run the suite a config describes, writing everything under
/// `cfg.output_dir`:
///
/// - `config.cfg`: the canonical config, which reproduces this run exactly
/// - `manifest.json`: version, config hash, seed list, variant labels
/// - `<variant>/seed_<k>.csv`: full per-step traces
/// - `summary.csv`: final error and error-curve sum per variant and seed
/// - `curves.csv`: per-step median and quartiles of the error across seeds
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteResult> {
    cfg.validate()?;
    if cfg.suite == SuiteKind::BoundsVerify {
        return Err(Error::Config(
            "the bounds-verify suite runs no learners; use the bounds-verify command".to_string(),
        ));
    }
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.cfg"), cfg.canonical())?;
    let config_hash = config_sha256(cfg);

    let base = random_mdp(
        cfg.n_states,
        cfg.n_actions,
        cfg.gamma0,
        &mut substream(MASTER_SEED, &[TAG_BASE]),
    )?;
    let q_star = solve_q_star(&base, SUITE_SOLVE_TOL)?.q_star;

    // one fixed source per perturbation, shared by every seed
    let mut sources: Vec<(Mdp, QTable)> = Vec::new();
    for (i, spec) in cfg.perturbations.iter().enumerate() {
        let mut rng = substream(MASTER_SEED, &[TAG_PERTURB, i as u64]);
        let perturbed = perturb(&base, spec, &mut rng)?;
        let source_q = solve_q_star(&perturbed, SUITE_SOLVE_TOL)?.q_star;
        sources.push((perturbed, source_q));
    }

    let plans = plan_variants(cfg);
    let mut summary = BufWriter::new(File::create(out.join("summary.csv"))?);
    writeln!(summary, "variant,seed,final_mne,auc")?;
    let mut curves = BufWriter::new(File::create(out.join("curves.csv"))?);
    writeln!(curves, "variant,step,median,q25,q75")?;

    let mut variants = Vec::new();
    for plan in &plans {
        let variant_dir = out.join(&plan.label);
        std::fs::create_dir_all(&variant_dir)?;
        let source_q = plan.source.map(|i| &sources[i].1);
        let learner_cfg = LearnerConfig {
            horizon: cfg.horizon,
            gate: plan.gate,
            safe_check_period: cfg.safe_check_period,
            init: InitQ::Zero,
        };

        let mut finals = Vec::with_capacity(cfg.seeds);
        let mut aucs = Vec::with_capacity(cfg.seeds);
        let mut mne_curves: Vec<Vec<f64>> = Vec::with_capacity(cfg.seeds);
        for seed in 0..cfg.seeds as u64 {
            // the same stream for every variant pairs the noise across them
            let mut rng = run_stream(seed);
            let trace = crate::learner::run(&base, source_q, &q_star, &learner_cfg, &mut rng)?;
            write_trace_csv(&variant_dir.join(format!("seed_{seed}.csv")), &trace)?;
            let final_mne = trace.final_q.sup_diff(&q_star)?;
            let auc: f64 = trace.steps.iter().map(|r| r.mne).sum();
            writeln!(summary, "{},{},{},{}", plan.label, seed, final_mne, auc)?;
            finals.push(final_mne);
            aucs.push(auc);
            mne_curves.push(trace.steps.iter().map(|r| r.mne).collect());
        }

        let mut step_values = vec![0.0; cfg.seeds];
        for t in 0..cfg.horizon {
            for (k, curve) in mne_curves.iter().enumerate() {
                step_values[k] = curve[t];
            }
            writeln!(
                curves,
                "{},{},{},{},{}",
                plan.label,
                t + 1,
                quantile(&step_values, 0.5),
                quantile(&step_values, 0.25),
                quantile(&step_values, 0.75)
            )?;
        }

        let distance = match plan.source {
            Some(i) => q_star.sup_diff(&sources[i].1)?,
            None => 0.0,
        };
        variants.push(VariantResult {
            label: plan.label.clone(),
            spec: plan.source.map(|i| cfg.perturbations[i]),
            gate: plan.gate,
            distance,
            median_final: quantile(&finals, 0.5),
            q25_final: quantile(&finals, 0.25),
            q75_final: quantile(&finals, 0.75),
            finals,
            aucs,
        });
    }
    summary.flush()?;
    curves.flush()?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        suite: cfg.suite.name().to_string(),
        config_sha256: config_hash.clone(),
        master_seed: MASTER_SEED,
        seeds: (0..cfg.seeds as u64).collect(),
        variants: plans.iter().map(|p| p.label.clone()).collect(),
    };
    let manifest_body = serde_json::to_string_pretty(&manifest)
        .expect("manifest serialization cannot fail") + "\n";
    std::fs::write(out.join("manifest.json"), manifest_body)?;

    Ok(SuiteResult { suite: cfg.suite, config_sha256: config_hash, variants })
}

/// Learning-noise stream for one seed, identical across variants.
pub fn run_stream(seed: u64) -> DetRng {
    substream(MASTER_SEED, &[TAG_RUN, seed])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn small_config(suite: SuiteKind, out: PathBuf) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_for(suite);
        cfg.n_states = 8;
        cfg.n_actions = 3;
        cfg.horizon = 40;
        cfg.seeds = 3;
        cfg.output_dir = out;
        cfg
    }

    #[test]
    fn quantiles_interpolate_between_order_statistics() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 0.25), 1.75);
        assert_eq!(quantile(&xs, 0.75), 3.25);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&[5.0], 0.5), 5.0);
    }

    #[test]
    fn plans_cover_both_suite_shapes() {
        let sim = ExperimentConfig::default_for(SuiteKind::Similarity);
        let plans = plan_variants(&sim);
        assert_eq!(plans.len(), 10);
        assert_eq!(plans[0].label, "baseline");
        assert_eq!(plans[0].gate, GatePolicy::NeverTransfer);
        assert!(plans[1..].iter().all(|p| p.gate == GatePolicy::BellmanGate));

        let sc = ExperimentConfig::default_for(SuiteKind::SafeCondition);
        let plans = plan_variants(&sc);
        assert_eq!(plans.len(), 7);
        assert_eq!(plans[1].label, "transition-0.05-gated");
        assert_eq!(plans[2].label, "transition-0.05-always");

        let mut custom = ExperimentConfig::default_for(SuiteKind::Custom);
        custom
            .perturbations
            .push(PerturbSpec::new(crate::synth::PerturbAxis::Reward, 0.4).unwrap());
        let plans = plan_variants(&custom);
        assert_eq!(plans.len(), 2);
        assert_eq!(plans[1].gate, GatePolicy::BellmanGate);

        let bv = ExperimentConfig::default_for(SuiteKind::BoundsVerify);
        assert!(plan_variants(&bv).is_empty());
        assert!(matches!(run_suite(&bv), Err(Error::Config(_))));
    }

    #[test]
    fn similarity_suite_writes_the_full_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(SuiteKind::Similarity, dir.path().join("out"));
        let result = run_suite(&cfg).unwrap();
        assert_eq!(result.variants.len(), 10);
        assert_eq!(result.variants[0].distance, 0.0);
        assert!(result.variants[1..].iter().all(|v| v.distance > 0.0));
        for v in &result.variants {
            assert_eq!(v.finals.len(), 3);
            assert!(v.q25_final <= v.median_final && v.median_final <= v.q75_final);
        }

        let out = &cfg.output_dir;
        for name in ["config.cfg", "manifest.json", "summary.csv", "curves.csv"] {
            assert!(out.join(name).is_file(), "{name} missing");
        }
        let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + 10 * 3);
        assert_eq!(summary.lines().next().unwrap(), "variant,seed,final_mne,auc");
        let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
        assert_eq!(curves.lines().count(), 1 + 10 * 40);
        let trace = std::fs::read_to_string(out.join("baseline/seed_0.csv")).unwrap();
        assert_eq!(trace.lines().count(), 1 + 40);
        assert_eq!(trace.lines().next().unwrap(), "step,mne,mnbe,transfer_flag,beta_hat,alpha");
        // the baseline never transfers
        for line in trace.lines().skip(1) {
            assert_eq!(line.split(',').nth(3).unwrap(), "0");
        }
    }

    #[test]
    fn emitted_config_reproduces_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(SuiteKind::SafeCondition, dir.path().join("a"));
        run_suite(&cfg).unwrap();

        let emitted = std::fs::read_to_string(cfg.output_dir.join("config.cfg")).unwrap();
        let mut reparsed: ExperimentConfig = emitted.parse().unwrap();
        assert_eq!(reparsed, cfg);
        reparsed.output_dir = dir.path().join("b");
        run_suite(&reparsed).unwrap();

        for rel in ["summary.csv", "curves.csv", "baseline/seed_0.csv", "gamma-0.3-always/seed_2.csv"] {
            let a = std::fs::read(cfg.output_dir.join(rel)).unwrap();
            let b = std::fs::read(reparsed.output_dir.join(rel)).unwrap();
            assert_eq!(a, b, "{rel} differs between reruns");
        }
        let manifest = std::fs::read_to_string(cfg.output_dir.join("manifest.json")).unwrap();
        assert!(manifest.contains(&config_sha256(&cfg)));
    }

    #[test]
    fn paired_streams_make_baselines_identical_across_suites() {
        let dir = tempfile::tempdir().unwrap();
        let sim = small_config(SuiteKind::Similarity, dir.path().join("sim"));
        let mut sc = small_config(SuiteKind::SafeCondition, dir.path().join("sc"));
        sc.perturbations = sim.perturbations.clone();
        run_suite(&sim).unwrap();
        run_suite(&sc).unwrap();
        let a = std::fs::read(sim.output_dir.join("baseline/seed_1.csv")).unwrap();
        let b = std::fs::read(sc.output_dir.join("baseline/seed_1.csv")).unwrap();
        assert_eq!(a, b);
    }
}
