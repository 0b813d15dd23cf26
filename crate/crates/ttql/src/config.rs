//! Flat `key = value` experiment configuration with a canonical serialization,
//! so an emitted config file reparses to the identical configuration and
//! reserializes byte for byte.

use crate::error::{Error, Result};
use crate::synth::{PerturbAxis, PerturbSpec};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Which experiment family to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    /// Gated transfer from sources at graded distances, one variant per
    /// perturbation.
    Similarity,
    /// Gated versus ungated transfer from the same sources.
    SafeCondition,
    /// The closed-form bound grid check, written as a CSV; no learner runs.
    BoundsVerify,
    /// A user-supplied source list run through the similarity pipeline; the
    /// config must spell out every `axis.N`/`epsilon.N` pair.
    Custom,
}

impl SuiteKind {
    pub fn name(&self) -> &'static str {
        match self {
            SuiteKind::Similarity => "exp-similarity",
            SuiteKind::SafeCondition => "exp-safecond",
            SuiteKind::BoundsVerify => "bounds-verify",
            SuiteKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for SuiteKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<SuiteKind> {
        match s {
            "exp-similarity" => Ok(SuiteKind::Similarity),
            "exp-safecond" => Ok(SuiteKind::SafeCondition),
            "bounds-verify" => Ok(SuiteKind::BoundsVerify),
            "custom" => Ok(SuiteKind::Custom),
            other => Err(Error::Config(format!(
                "unknown suite '{other}' (expected exp-similarity, exp-safecond, bounds-verify, or custom)"
            ))),
        }
    }
}

/// Everything a suite run depends on. Seeds are always `0..seeds`; variant
/// streams are derived from them, so two configs with equal fields produce
/// identical runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub suite: SuiteKind,
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma0: f64,
    pub horizon: usize,
    pub seeds: usize,
    pub safe_check_period: usize,
    /// Similarity: the transfer sources, one variant each.
    /// Safe-condition: the sources each run both gated and ungated.
    pub perturbations: Vec<PerturbSpec>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn default_for(suite: SuiteKind) -> ExperimentConfig {
        let perturbations = match suite {
            SuiteKind::Similarity => {
                let mut v = Vec::new();
                for axis in [PerturbAxis::Gamma, PerturbAxis::Reward, PerturbAxis::Transition] {
                    for eps in [0.05, 0.15, 0.3] {
                        v.push(PerturbSpec { axis, magnitude: eps });
                    }
                }
                v
            }
            // one source per axis at sharply increasing distance: the nearest
            // keeps the gate open for the whole run, the farthest has a value
            // scale wrong enough that ungated transfer never recovers
            SuiteKind::SafeCondition => vec![
                PerturbSpec { axis: PerturbAxis::Transition, magnitude: 0.05 },
                PerturbSpec { axis: PerturbAxis::Gamma, magnitude: 0.15 },
                PerturbSpec { axis: PerturbAxis::Gamma, magnitude: 0.3 },
            ],
            // bounds-verify runs no learners; custom must spell its sources out
            SuiteKind::BoundsVerify | SuiteKind::Custom => Vec::new(),
        };
        ExperimentConfig {
            suite,
            n_states: 50,
            n_actions: 50,
            gamma0: 0.9,
            horizon: 10_000,
            seeds: 20,
            safe_check_period: 1,
            perturbations,
            output_dir: PathBuf::from(format!("runs/{}", suite.name())),
        }
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let body = std::fs::read_to_string(path)?;
        body.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::Config("n_states and n_actions must be at least 1".into()));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 < 1.0) {
            return Err(Error::Config(format!(
                "gamma0 must lie strictly inside (0, 1), got {}",
                self.gamma0
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.safe_check_period == 0 {
            return Err(Error::Config("safe_check_period must be at least 1".into()));
        }
        match self.suite {
            SuiteKind::BoundsVerify => {
                if !self.perturbations.is_empty() {
                    return Err(Error::Config(
                        "the bounds-verify suite takes no perturbations".into(),
                    ));
                }
            }
            _ => {
                if self.perturbations.is_empty() {
                    return Err(Error::Config("at least one perturbation is required".into()));
                }
            }
        }
        for p in &self.perturbations {
            if !(p.magnitude >= 0.0 && p.magnitude.is_finite()) {
                return Err(Error::Config(format!(
                    "perturbation magnitude must be finite and nonnegative, got {}",
                    p.magnitude
                )));
            }
        }
        Ok(())
    }

    /// Canonical text form: fixed key order, one `axis.N`/`epsilon.N` pair per
    /// perturbation. Parsing this text yields an equal config, and
    /// serializing that config reproduces the text exactly.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("suite = {}\n", self.suite.name()));
        out.push_str(&format!("n_states = {}\n", self.n_states));
        out.push_str(&format!("n_actions = {}\n", self.n_actions));
        out.push_str(&format!("gamma0 = {}\n", self.gamma0));
        out.push_str(&format!("horizon = {}\n", self.horizon));
        out.push_str(&format!("seeds = {}\n", self.seeds));
        out.push_str(&format!("safe_check_period = {}\n", self.safe_check_period));
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        for (i, p) in self.perturbations.iter().enumerate() {
            out.push_str(&format!("axis.{} = {}\n", i, p.axis.name()));
            out.push_str(&format!("epsilon.{} = {}\n", i, p.magnitude));
        }
        out
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse value '{value}'")))
}

impl std::str::FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(body: &str) -> Result<ExperimentConfig> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            pairs.push((key, value));
        }

        let suite = match pairs.iter().find(|(k, _)| k == "suite") {
            Some((_, v)) => v.parse()?,
            None => SuiteKind::Similarity,
        };
        let mut cfg = ExperimentConfig::default_for(suite);

        let mut axes: BTreeMap<usize, PerturbAxis> = BTreeMap::new();
        let mut epsilons: BTreeMap<usize, f64> = BTreeMap::new();
        for (key, value) in &pairs {
            match key.as_str() {
                "suite" => {}
                "n_states" => cfg.n_states = parse_value(key, value)?,
                "n_actions" => cfg.n_actions = parse_value(key, value)?,
                "gamma0" => cfg.gamma0 = parse_value(key, value)?,
                "horizon" => cfg.horizon = parse_value(key, value)?,
                "seeds" => cfg.seeds = parse_value(key, value)?,
                "safe_check_period" => cfg.safe_check_period = parse_value(key, value)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                _ => {
                    if let Some(idx) = key.strip_prefix("axis.") {
                        let idx: usize = parse_value(key, idx)?;
                        axes.insert(idx, value.parse()?);
                    } else if let Some(idx) = key.strip_prefix("epsilon.") {
                        let idx: usize = parse_value(key, idx)?;
                        epsilons.insert(idx, parse_value(key, value)?);
                    } else {
                        return Err(Error::Config(format!("unknown key '{key}'")));
                    }
                }
            }
        }

        if !axes.is_empty() || !epsilons.is_empty() {
            let axis_keys: Vec<usize> = axes.keys().copied().collect();
            let eps_keys: Vec<usize> = epsilons.keys().copied().collect();
            if axis_keys != eps_keys {
                return Err(Error::Config(format!(
                    "axis.N and epsilon.N indices must match, got axes {axis_keys:?} vs epsilons {eps_keys:?}"
                )));
            }
            let expected: Vec<usize> = (0..axis_keys.len()).collect();
            if axis_keys != expected {
                return Err(Error::Config(format!(
                    "perturbation indices must be 0..{} without gaps, got {axis_keys:?}",
                    axis_keys.len()
                )));
            }
            cfg.perturbations = axis_keys
                .iter()
                .map(|i| PerturbSpec { axis: axes[i], magnitude: epsilons[i] })
                .collect();
        }

        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_nine_and_three_sources() {
        let sim = ExperimentConfig::default_for(SuiteKind::Similarity);
        assert_eq!(sim.perturbations.len(), 9);
        assert_eq!(sim.n_states, 50);
        assert_eq!(sim.horizon, 10_000);
        let sc = ExperimentConfig::default_for(SuiteKind::SafeCondition);
        assert_eq!(sc.perturbations.len(), 3);
        // sources ordered nearest to farthest
        assert_eq!(sc.perturbations[0].axis, PerturbAxis::Transition);
        assert!(sc.perturbations.windows(2).all(|w| w[0].magnitude <= w[1].magnitude));
        sim.validate().unwrap();
        sc.validate().unwrap();
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let mut custom = ExperimentConfig::default_for(SuiteKind::Custom);
        custom.perturbations = vec![PerturbSpec { axis: PerturbAxis::Reward, magnitude: 0.4 }];
        let cases = [
            ExperimentConfig::default_for(SuiteKind::Similarity),
            ExperimentConfig::default_for(SuiteKind::SafeCondition),
            ExperimentConfig::default_for(SuiteKind::BoundsVerify),
            custom,
        ];
        for cfg in cases {
            let text = cfg.canonical();
            let reparsed: ExperimentConfig = text.parse().unwrap();
            assert_eq!(reparsed, cfg);
            assert_eq!(reparsed.canonical(), text);
        }
    }

    #[test]
    fn custom_needs_sources_and_bounds_verify_refuses_them() {
        assert!("suite = custom\n".parse::<ExperimentConfig>().is_err());
        assert!("suite = custom\naxis.0 = reward\nepsilon.0 = 0.2\n"
            .parse::<ExperimentConfig>()
            .is_ok());
        assert!("suite = bounds-verify\n".parse::<ExperimentConfig>().is_ok());
        assert!("suite = bounds-verify\naxis.0 = reward\nepsilon.0 = 0.2\n"
            .parse::<ExperimentConfig>()
            .is_err());
    }

    #[test]
    fn parses_overrides_comments_and_custom_perturbations() {
        let text = "\
# scaled-down run
suite = exp-safecond
n_states = 10
n_actions = 4

horizon = 500
seeds = 3
axis.0 = transition
epsilon.0 = 0.1
axis.1 = gamma
epsilon.1 = 0.2
output_dir = /tmp/out
";
        let cfg: ExperimentConfig = text.parse().unwrap();
        assert_eq!(cfg.suite, SuiteKind::SafeCondition);
        assert_eq!(cfg.n_states, 10);
        assert_eq!(cfg.n_actions, 4);
        assert_eq!(cfg.horizon, 500);
        assert_eq!(cfg.seeds, 3);
        assert_eq!(cfg.gamma0, 0.9);
        assert_eq!(
            cfg.perturbations,
            vec![
                PerturbSpec { axis: PerturbAxis::Transition, magnitude: 0.1 },
                PerturbSpec { axis: PerturbAxis::Gamma, magnitude: 0.2 },
            ]
        );
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/out"));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!("nonsense\n".parse::<ExperimentConfig>().is_err());
        assert!("mystery_key = 3\n".parse::<ExperimentConfig>().is_err());
        assert!("suite = exp-similarity\nsuite = exp-safecond\n".parse::<ExperimentConfig>().is_err());
        assert!("axis.0 = gamma\n".parse::<ExperimentConfig>().is_err());
        assert!("axis.0 = gamma\nepsilon.1 = 0.1\n".parse::<ExperimentConfig>().is_err());
        assert!("axis.1 = gamma\nepsilon.1 = 0.1\n".parse::<ExperimentConfig>().is_err());
        assert!("gamma0 = 1.5\n".parse::<ExperimentConfig>().is_err());
        assert!("seeds = 0\n".parse::<ExperimentConfig>().is_err());
        assert!("horizon = ten\n".parse::<ExperimentConfig>().is_err());
    }
}
