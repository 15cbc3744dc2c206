use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};
use crate::general::SetSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Pca,
    Regression,
    Gmm,
    Logistic,
    Ising,
    General,
    BiomarkerSim,
}

impl Setting {
    pub const ALL: [Setting; 7] = [
        Setting::Pca,
        Setting::Regression,
        Setting::Gmm,
        Setting::Logistic,
        Setting::Ising,
        Setting::General,
        Setting::BiomarkerSim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Pca => "pca",
            Setting::Regression => "regression",
            Setting::Gmm => "gmm",
            Setting::Logistic => "logistic",
            Setting::Ising => "ising",
            Setting::General => "general",
            Setting::BiomarkerSim => "biomarker_sim",
        }
    }

    /// Highest cumulant order the target learner consumes.
    pub fn default_t_max(self, poly_degree: usize) -> usize {
        match self {
            Setting::Pca | Setting::Regression => 2,
            Setting::Gmm | Setting::General => 3,
            Setting::Logistic | Setting::BiomarkerSim => (poly_degree + 1).min(4),
            Setting::Ising => 4,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = RcaError;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| RcaError::Config(format!("unknown setting '{s}'")))
    }
}

/// Estimators compared in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Learner fed with the hidden target samples.
    True,
    /// Learner fed with extracted cumulants.
    Rca,
    /// Learner fed with the raw first view.
    Naive,
    /// Learner fed with the first view projected away from its canonical
    /// correlation subspace.
    Cca,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::True, Arm::Rca, Arm::Naive, Arm::Cca];

    pub fn name(self) -> &'static str {
        match self {
            Arm::True => "true",
            Arm::Rca => "rca",
            Arm::Naive => "naive",
            Arm::Cca => "cca",
        }
    }

    /// Parses a comma separated list such as `rca,naive`.
    pub fn parse_list(s: &str) -> Result<Vec<Arm>> {
        let mut arms: Vec<Arm> = s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        arms.sort();
        arms.dedup();
        if arms.is_empty() {
            return Err(RcaError::Config("empty arm list".into()));
        }
        Ok(arms)
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = RcaError;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| RcaError::Config(format!("unknown arm '{s}'")))
    }
}

/// One experiment: a setting, its size, the arms to compare and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    /// Dimension of the first view; for `ising` the side of the grid.
    pub d: usize,
    pub n: usize,
    /// Target ratio of the standard deviations of the shared and the target
    /// component (matched through covariance traces). `None` keeps the
    /// generator's own scale.
    pub perturbation_ratio: Option<f64>,
    pub seed: u64,
    pub arms: Vec<Arm>,
    /// Repeat `r` uses seed `seed + r + 1`.
    pub repeats: usize,
    /// Highest extracted cumulant order; defaults per setting.
    pub t_max: Option<usize>,
    pub poly_degree: usize,
    pub batch: usize,
    /// Noise scale of the PCA and mixture generators.
    pub sigma: f64,
    /// Canonical correlations above this are projected out by the CCA arm.
    pub cca_threshold: f64,
    /// Components and views for the `general` setting.
    pub set_system: Option<SetSystem>,
    pub sgd_iters: usize,
    pub sgd_step: f64,
    pub gd_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            setting: Setting::Pca,
            d: 10,
            n: 1000,
            perturbation_ratio: None,
            seed: 0,
            arms: Arm::ALL.to_vec(),
            repeats: 10,
            t_max: None,
            poly_degree: 4,
            batch: 100,
            sigma: 0.5,
            cca_threshold: 0.3,
            set_system: None,
            sgd_iters: 500,
            sgd_step: 0.05,
            gd_iters: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn new(setting: Setting, d: usize, n: usize, seed: u64) -> Self {
        ExperimentConfig {
            setting,
            d,
            n,
            seed,
            ..ExperimentConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| RcaError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn t_max(&self) -> usize {
        self.t_max.unwrap_or_else(|| self.setting.default_t_max(self.poly_degree))
    }

    /// Dimension of each view.
    pub fn view_dim(&self) -> usize {
        match self.setting {
            Setting::Ising => self.d * self.d,
            _ => self.d,
        }
    }

    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64 + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RcaError::Config(msg));
        if self.n == 0 {
            return fail("n must be at least 1".into());
        }
        if self.d == 0 {
            return fail("d must be at least 1".into());
        }
        if self.setting == Setting::Ising && self.d < 3 {
            return fail(format!("ising needs a grid side of at least 3, got {}", self.d));
        }
        if let Some(r) = self.perturbation_ratio {
            if !(r.is_finite() && r >= 0.0) {
                return fail(format!("perturbation_ratio must be finite and >= 0, got {r}"));
            }
        }
        if self.repeats == 0 {
            return fail("repeats must be at least 1".into());
        }
        if self.arms.is_empty() {
            return fail("at least one arm is required".into());
        }
        if !(3..=5).contains(&self.poly_degree) {
            return fail(format!("poly_degree must lie in 3..=5, got {}", self.poly_degree));
        }
        let t = self.t_max();
        if !(2..=crate::cumulant::MAX_ORDER).contains(&t) {
            return fail(format!("t_max must lie in 2..={}, got {t}", crate::cumulant::MAX_ORDER));
        }
        if self.batch == 0 || self.sgd_iters == 0 || self.gd_iters == 0 {
            return fail("batch and iteration counts must be positive".into());
        }
        if !(self.sgd_step.is_finite() && self.sgd_step > 0.0) {
            return fail(format!("sgd_step must be positive, got {}", self.sgd_step));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(0.0..1.0).contains(&self.cca_threshold) {
            return fail(format!("cca_threshold must lie in [0, 1), got {}", self.cca_threshold));
        }
        if self.set_system.is_some() && self.setting != Setting::General {
            return fail("set_system only applies to the general setting".into());
        }
        Ok(())
    }
}

/// A grid of runs: every combination of the listed sample sizes and
/// perturbation ratios applied to `base`. An absent list keeps the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub perturbation_ratio: Vec<f64>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let sweep: SweepConfig = serde_json::from_str(text).map_err(|e| RcaError::Config(e.to_string()))?;
        for cfg in sweep.expand() {
            cfg.validate()?;
        }
        Ok(sweep)
    }

    /// Configs ordered by sample size, then ratio.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let ns = if self.n.is_empty() { vec![self.base.n] } else { self.n.clone() };
        let ratios: Vec<Option<f64>> = if self.perturbation_ratio.is_empty() {
            vec![self.base.perturbation_ratio]
        } else {
            self.perturbation_ratio.iter().map(|&r| Some(r)).collect()
        };
        ns.iter()
            .flat_map(|&n| {
                ratios.iter().map(move |&perturbation_ratio| ExperimentConfig {
                    n,
                    perturbation_ratio,
                    ..self.base.clone()
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_defaults_and_errors() {
        let cfg = ExperimentConfig::from_json(r#"{"setting": "gmm", "n": 300}"#).unwrap();
        assert_eq!(cfg.setting, Setting::Gmm);
        assert_eq!(cfg.d, 10);
        assert_eq!(cfg.t_max(), 3);
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"setting": "tsne"}"#),
            Err(RcaError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"setting": "pca", "n": 0}"#),
            Err(RcaError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"setting": "pca", "colour": 1}"#),
            Err(RcaError::Config(_))
        ));
    }

    #[test]
    fn arm_lists() {
        assert_eq!(Arm::parse_list("naive, rca,naive").unwrap(), vec![Arm::Rca, Arm::Naive]);
        assert!(Arm::parse_list("oracle").is_err());
        assert!(Arm::parse_list("").is_err());
    }

    #[test]
    fn sweep_grid() {
        let sweep = SweepConfig::from_json(
            r#"{"base": {"setting": "pca", "repeats": 2}, "n": [100, 300], "perturbation_ratio": [0.5, 1.0, 2.0]}"#,
        )
        .unwrap();
        let cfgs = sweep.expand();
        assert_eq!(cfgs.len(), 6);
        assert_eq!((cfgs[0].n, cfgs[0].perturbation_ratio), (100, Some(0.5)));
        assert_eq!((cfgs[5].n, cfgs[5].perturbation_ratio), (300, Some(2.0)));
        assert!(cfgs.iter().all(|c| c.repeats == 2));
        let plain = SweepConfig::from_json(r#"{"base": {"setting": "gmm"}}"#).unwrap();
        assert_eq!(plain.expand(), vec![plain.base.clone()]);
        assert!(SweepConfig::from_json(r#"{"base": {}, "n": [0]}"#).is_err());
    }

    #[test]
    fn setting_round_trip() {
        for s in Setting::ALL {
            assert_eq!(s.name().parse::<Setting>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
    }
}
