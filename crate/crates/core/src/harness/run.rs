use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cca::cca_project;
use super::config::{Arm, ExperimentConfig, Setting};
use super::generate::{generate, Dataset, GroundTruth};
use crate::contrastive::{estimate_a_from, run_contrastive, ConditioningReport, ContrastiveOptions};
use crate::cumulant::{ComponentCumulants, SampleMatrix, SampleViews};
use crate::error::{RcaError, Result};
use crate::general::{compute_cumulants, find_linear, GeneralOptions};
use crate::gradient::ising::{contrastive_ising, fit_composite, fit_naive, IsingSgdConfig, IsingSpec};
use crate::gradient::{contrastive_logistic, GdTrace, LogisticConfig};
use crate::learners::{
    contrastive_gmm, contrastive_lsr, contrastive_pca, direction_mse, matched_center_mse, mse, GmmOptions,
    RegressionResult,
};
use crate::tensor::{pinv, LinearMap};

/// Relative cutoff for the minimum-norm regression used on CCA-projected data.
const PROJECTED_LSR_TOL: f64 = 1e-8;

/// Result of one arm on one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub mse: f64,
    /// MSE after every iteration for gradient-based learners.
    pub trace: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    /// MSE of each successful repeat, in repeat order.
    pub mse: Vec<f64>,
    pub mse_mean: f64,
    /// Sample standard deviation over successful repeats.
    pub mse_std: f64,
    /// `(repeat, message)` for every failed repeat.
    pub failures: Vec<(usize, String)>,
    /// Iteration trace of the first successful repeat.
    pub trace: Option<Vec<f64>>,
}

impl ArmSummary {
    fn collect(arm: Arm, outcomes: Vec<Result<ArmOutcome>>) -> Self {
        let mut mse = Vec::new();
        let mut failures = Vec::new();
        let mut trace = None;
        for (r, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(o) => {
                    if trace.is_none() {
                        trace = o.trace;
                    }
                    mse.push(o.mse);
                }
                Err(e) => failures.push((r, e.to_string())),
            }
        }
        let (mse_mean, mse_std) = mean_std(&mse);
        ArmSummary {
            arm,
            mse,
            mse_mean,
            mse_std,
            failures,
            trace,
        }
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub arms: Vec<ArmSummary>,
    /// Conditioning of the extraction on each repeat, when the RCA arm ran.
    pub conditioning: Vec<Option<ConditioningReport>>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn arm(&self, arm: Arm) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    /// The report with timing zeroed; equal for equal configs.
    pub fn without_timing(&self) -> RunReport {
        RunReport {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for a in &self.arms {
            push_row(&mut out, &self.config, a);
        }
        out
    }
}

const CSV_HEADER: &str = "setting,d,n,perturbation_ratio,arm,mse_mean,mse_std,succeeded,failed";

fn push_row(out: &mut String, c: &ExperimentConfig, a: &ArmSummary) {
    let ratio = c.perturbation_ratio.map(|r| r.to_string()).unwrap_or_default();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        c.setting,
        c.d,
        c.n,
        ratio,
        a.arm,
        a.mse_mean,
        a.mse_std,
        a.mse.len(),
        a.failures.len()
    );
}

/// Reports of several runs, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub reports: Vec<RunReport>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.reports {
            for a in &r.arms {
                push_row(&mut out, &r.config, a);
            }
        }
        out
    }

    /// Mean MSE of `arm` across the sweep points, in order.
    pub fn column(&self, arm: Arm) -> Vec<f64> {
        self.reports
            .iter()
            .map(|r| r.arm(arm).map_or(f64::NAN, |a| a.mse_mean))
            .collect()
    }
}

/// Runs every requested arm on `config.repeats` independently seeded datasets.
/// A failing arm is recorded and the run continues; a failing generator
/// aborts the run.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let mut per_arm: Vec<Vec<Result<ArmOutcome>>> = config.arms.iter().map(|_| Vec::new()).collect();
    let mut conditioning = Vec::with_capacity(config.repeats);
    for r in 0..config.repeats {
        let data = generate(config, config.repeat_seed(r))?;
        let mut cond = None;
        for (slot, &arm) in per_arm.iter_mut().zip(&config.arms) {
            slot.push(evaluate_arm(config, &data, arm, &mut cond));
        }
        conditioning.push(cond);
    }
    let arms = config
        .arms
        .iter()
        .zip(per_arm)
        .map(|(&arm, outcomes)| ArmSummary::collect(arm, outcomes))
        .collect();
    Ok(RunReport {
        config: config.clone(),
        arms,
        conditioning,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn sweep(configs: &[ExperimentConfig]) -> Result<SweepTable> {
    Ok(SweepTable {
        reports: configs.iter().map(run).collect::<Result<_>>()?,
    })
}

fn contrastive_options(data: &Dataset) -> ContrastiveOptions {
    ContrastiveOptions {
        shared_rank: data.shared_rank,
        ..ContrastiveOptions::default()
    }
}

fn mean_product(labels: &[f64], x: &SampleMatrix) -> Vec<f64> {
    let mut out = vec![0.0; x.d()];
    for (y, r) in labels.iter().zip(x.rows()) {
        out.iter_mut().zip(r).for_each(|(o, v)| *o += y * v);
    }
    let n = x.n() as f64;
    out.into_iter().map(|v| v / n).collect()
}

/// Samples the arm's learner sees: hidden `S1`, raw `U`, or projected `U`.
fn arm_samples(config: &ExperimentConfig, data: &Dataset, arm: Arm) -> Result<SampleMatrix> {
    match arm {
        Arm::True => Ok(data.s1().clone()),
        Arm::Naive => Ok(data.u().clone()),
        Arm::Cca => {
            let (x, proj) = cca_project(data.u(), data.v(), config.cca_threshold)?;
            if proj.unidentifiable {
                return Err(RcaError::Unidentifiable("CCA removed every direction of U".into()));
            }
            Ok(x)
        }
        Arm::Rca => unreachable!("the RCA arm uses extracted cumulants"),
    }
}

fn evaluate_arm(
    config: &ExperimentConfig,
    data: &Dataset,
    arm: Arm,
    cond: &mut Option<ConditioningReport>,
) -> Result<ArmOutcome> {
    match config.setting {
        Setting::Ising => return evaluate_ising(config, data, arm, cond),
        Setting::General => return evaluate_general(config, data, arm),
        _ => {}
    }
    let t_max = config.t_max();
    // cumulants of the learner's input and the samples behind E[Y X]
    let (cumulants, label_view) = if arm == Arm::Rca {
        let ext = run_contrastive(data.u(), data.v(), t_max, &contrastive_options(data))?;
        *cond = Some(ext.diagnostics.clone());
        (ext.s1, data.u().clone())
    } else {
        let x = arm_samples(config, data, arm)?;
        (ComponentCumulants::from_samples(&x, t_max)?, x)
    };
    match (config.setting, &data.truth) {
        (Setting::Pca, GroundTruth::Direction(v1)) => {
            let r = contrastive_pca(&cumulants)?;
            Ok(ArmOutcome {
                mse: direction_mse(&r.top_eigenvector, v1),
                trace: None,
            })
        }
        (Setting::Regression, GroundTruth::Coefficients(beta)) => {
            let xy = mean_product(labels(data)?, &label_view);
            let fit = if arm == Arm::Cca {
                // the projection leaves a singular second moment; take the minimum-norm fit
                let m = cumulants.second_moment()?;
                let b = pinv(&m, PROJECTED_LSR_TOL)? * nalgebra::DVector::from_column_slice(&xy);
                RegressionResult {
                    beta: b.iter().copied().collect(),
                }
            } else {
                contrastive_lsr(&cumulants, &xy)?
            };
            Ok(ArmOutcome {
                mse: mse(&fit.beta, beta),
                trace: None,
            })
        }
        (Setting::Gmm, GroundTruth::Centers { centers, .. }) => {
            let opts = GmmOptions {
                seed: config.seed,
                ..GmmOptions::default()
            };
            let fit = contrastive_gmm(&cumulants, centers.len(), &opts)?;
            Ok(ArmOutcome {
                mse: matched_center_mse(&fit.centers, centers),
                trace: None,
            })
        }
        (Setting::Logistic | Setting::BiomarkerSim, GroundTruth::Coefficients(beta)) => {
            let xy = mean_product(labels(data)?, &label_view);
            let cfg = LogisticConfig {
                poly_degree: config.poly_degree,
                max_iters: config.gd_iters,
                record_path: true,
                ..LogisticConfig::default()
            };
            let (fit, trace) = contrastive_logistic(&cumulants, &xy, &cfg)?;
            Ok(ArmOutcome {
                mse: mse(&fit.beta, beta),
                trace: Some(path_mse(&trace, beta)),
            })
        }
        (setting, _) => Err(RcaError::Config(format!("ground truth does not match setting {setting}"))),
    }
}

fn labels(data: &Dataset) -> Result<&[f64]> {
    data.labels
        .as_deref()
        .ok_or_else(|| RcaError::Config("setting has no labels".into()))
}

fn path_mse(trace: &GdTrace, truth: &[f64]) -> Vec<f64> {
    trace.path.iter().map(|theta| mse(theta, truth)).collect()
}

fn evaluate_ising(
    config: &ExperimentConfig,
    data: &Dataset,
    arm: Arm,
    cond: &mut Option<ConditioningReport>,
) -> Result<ArmOutcome> {
    let GroundTruth::Couplings(truth) = &data.truth else {
        return Err(RcaError::Config("ising data without couplings".into()));
    };
    let spec0 = truth.with_couplings(vec![0.0; truth.n_edges()])?;
    let sgd = IsingSgdConfig {
        step_size: config.sgd_step,
        batch: config.batch,
        max_iters: config.sgd_iters,
        record_path: true,
    };
    let (fit, trace): (IsingSpec, GdTrace) = match arm {
        Arm::True => fit_composite(&spec0, data.s1(), &sgd)?,
        Arm::Rca => {
            let opts = contrastive_options(data);
            let source = SampleViews::new(&[data.u(), data.v()])?;
            let (a_hat, report) = estimate_a_from(&source, &opts)?;
            *cond = Some(report);
            contrastive_ising(data.u(), data.v(), &a_hat, &spec0, &sgd, opts.shared_rank)?
        }
        Arm::Naive | Arm::Cca => fit_naive(&spec0, &arm_samples(config, data, arm)?, &sgd)?,
    };
    Ok(ArmOutcome {
        mse: mse(fit.couplings(), truth.couplings()),
        trace: Some(path_mse(&trace, truth.couplings())),
    })
}

/// Only the RCA arm applies: recover every map and report their entrywise MSE.
fn evaluate_general(config: &ExperimentConfig, data: &Dataset, arm: Arm) -> Result<ArmOutcome> {
    if arm != Arm::Rca {
        return Err(RcaError::Config(format!("arm {arm} does not apply to the general setting")));
    }
    let (GroundTruth::Maps(truth), Some(system)) = (&data.truth, &data.set_system) else {
        return Err(RcaError::Config("general data without maps".into()));
    };
    let refs: Vec<&SampleMatrix> = data.views.iter().collect();
    let source = SampleViews::new(&refs)?;
    let opts = GeneralOptions::default();
    let mut ext = find_linear(&source, system, &opts)?;
    let t = config.t_max().max(ext.level);
    compute_cumulants(&source, &mut ext, t, &opts)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (j, maps) in truth.iter().enumerate() {
        for (view, a) in maps {
            let est: &LinearMap = ext
                .map(*view, j)
                .ok_or_else(|| RcaError::Numeric(format!("component {j} has no map into view {view}")))?;
            total += (est - a).norm_squared();
            count += a.len();
        }
    }
    Ok(ArmOutcome {
        mse: total / count as f64,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arm_report() {
        let cfg = ExperimentConfig {
            arms: vec![Arm::Naive],
            repeats: 2,
            ..ExperimentConfig::new(Setting::Pca, 4, 200, 3)
        };
        let report = run(&cfg).unwrap();
        assert_eq!(report.arms.len(), 1);
        assert_eq!(report.arms[0].mse.len(), 2);
        assert!(report.arms[0].mse.iter().all(|m| *m >= 0.0));
        assert!(report.to_csv().lines().count() == 2);
    }

    #[test]
    fn general_rejects_other_arms_but_continues() {
        let cfg = ExperimentConfig {
            arms: vec![Arm::Rca, Arm::Naive],
            repeats: 1,
            ..ExperimentConfig::new(Setting::General, 2, 2000, 4)
        };
        let report = run(&cfg).unwrap();
        assert_eq!(report.arm(Arm::Naive).unwrap().failures.len(), 1);
        let rca = report.arm(Arm::Rca).unwrap();
        assert!(rca.failures.is_empty(), "{:?}", rca.failures);
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }
}
