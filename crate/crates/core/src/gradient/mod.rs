//! Gradient descent on approximate gradients built from extracted moments:
//! the generic driver, the polynomial sigmoid, logistic regression and
//! Ising composite likelihood.

mod chebyshev;
pub mod ising;
mod logistic;

pub use chebyshev::{chebyshev_sigmoid, eval_poly, sigmoid, SIGMOID_FIT_HALF_WIDTH};
pub use logistic::{contrastive_logistic, LogisticConfig, ProjectedMoments, SampleProjected};

use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxGdConfig {
    /// Defaults to `1 / (2 H)` when absent.
    pub step_size: Option<f64>,
    pub smoothness_h: f64,
    pub strong_convexity_mu: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub poly_degree: usize,
    /// Keep every iterate in the trace.
    pub record_path: bool,
}

impl Default for ApproxGdConfig {
    fn default() -> Self {
        ApproxGdConfig {
            step_size: None,
            smoothness_h: 1.0,
            strong_convexity_mu: 1.0,
            max_iters: 1000,
            grad_tol: 1e-10,
            poly_degree: 4,
            record_path: false,
        }
    }
}

impl ApproxGdConfig {
    pub fn step(&self) -> f64 {
        self.step_size.unwrap_or(1.0 / (2.0 * self.smoothness_h))
    }

    fn validate(&self) -> Result<()> {
        let step = self.step();
        if !(step.is_finite() && step > 0.0) {
            return Err(RcaError::InvalidInput(format!("step size must be positive, got {step}")));
        }
        if self.max_iters == 0 {
            return Err(RcaError::InvalidInput("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GdTrace {
    /// `|G(theta_t)|` for every evaluated iterate.
    pub grad_norms: Vec<f64>,
    /// `theta_0, theta_1, ...` when requested.
    pub path: Vec<Vec<f64>>,
}

/// Runs `theta <- theta - step * G(theta)` until `max_iters` steps or
/// `|G| < grad_tol`. `grad` receives the iterate and the iteration index.
pub fn approx_gd<G>(mut grad: G, theta0: &[f64], config: &ApproxGdConfig) -> Result<(Vec<f64>, GdTrace)>
where
    G: FnMut(&[f64], usize) -> Result<Vec<f64>>,
{
    config.validate()?;
    let step = config.step();
    let mut theta = theta0.to_vec();
    let mut trace = GdTrace::default();
    if config.record_path {
        trace.path.push(theta.clone());
    }
    for iteration in 0..config.max_iters {
        let g = grad(&theta, iteration)?;
        if g.len() != theta.len() {
            return Err(RcaError::Shape {
                mode: 0,
                expected: theta.len(),
                found: g.len(),
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(RcaError::Divergence { iteration });
        }
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        trace.grad_norms.push(norm);
        if norm < config.grad_tol {
            break;
        }
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= step * gi;
        }
        if config.record_path {
            trace.path.push(theta.clone());
        }
    }
    Ok((theta, trace))
}
