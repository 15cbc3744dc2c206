use serde::{Deserialize, Serialize};

use super::{approx_gd, chebyshev_sigmoid, ApproxGdConfig, GdTrace};
use crate::cumulant::{debiased_projected_moment, projected_moment, ComponentCumulants, SampleMatrix};
use crate::error::{RcaError, Result};
use crate::learners::RegressionResult;
use crate::tensor::{symmetric_eigen, LinearMap};

/// Access to `E[X (theta^T X)^p]` and `E[X X^T]` for some distribution of `X`.
pub trait ProjectedMoments {
    fn dim(&self) -> usize;
    fn projected(&self, theta: &[f64], power: usize) -> Result<Vec<f64>>;
    fn second_moment(&self) -> Result<LinearMap>;
}

impl ProjectedMoments for ComponentCumulants {
    fn dim(&self) -> usize {
        ComponentCumulants::dim(self)
    }

    fn projected(&self, theta: &[f64], power: usize) -> Result<Vec<f64>> {
        debiased_projected_moment(self, theta, power)
    }

    fn second_moment(&self) -> Result<LinearMap> {
        ComponentCumulants::second_moment(self)
    }
}

/// Plain empirical moments of a sample matrix.
pub struct SampleProjected<'a>(pub &'a SampleMatrix);

impl ProjectedMoments for SampleProjected<'_> {
    fn dim(&self) -> usize {
        self.0.d()
    }

    fn projected(&self, theta: &[f64], power: usize) -> Result<Vec<f64>> {
        projected_moment(self.0, theta, power)
    }

    fn second_moment(&self) -> Result<LinearMap> {
        let x = self.0.to_matrix();
        Ok(x.transpose() * &x / self.0.n() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub poly_degree: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Defaults to `1 / (2 H)` with `H = c_1 * lambda_max(E[X X^T])`.
    pub step_size: Option<f64>,
    pub record_path: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            poly_degree: 4,
            max_iters: 2000,
            grad_tol: 1e-10,
            step_size: None,
            record_path: false,
        }
    }
}

/// Logistic regression by gradient descent on the polynomial-sigmoid gradient
/// `-E[YX] + sum_k c_k E[X (theta^T X)^k]`, with every moment taken from
/// `moments`. `xy` is `E[Y X]`.
pub fn contrastive_logistic(
    moments: &dyn ProjectedMoments,
    xy: &[f64],
    config: &LogisticConfig,
) -> Result<(RegressionResult, GdTrace)> {
    let d = moments.dim();
    if xy.len() != d {
        return Err(RcaError::Shape {
            mode: 0,
            expected: d,
            found: xy.len(),
        });
    }
    let coeffs = chebyshev_sigmoid(config.poly_degree)?;
    let (eig, _) = symmetric_eigen(&moments.second_moment()?);
    let h = coeffs[1] * eig[d - 1];
    if !(h.is_finite() && h > 0.0) {
        return Err(RcaError::Numeric(format!("non-positive smoothness estimate {h}")));
    }
    let gd = ApproxGdConfig {
        step_size: config.step_size,
        smoothness_h: h,
        strong_convexity_mu: (coeffs[1] * eig[0]).max(0.0),
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        poly_degree: config.poly_degree,
        record_path: config.record_path,
    };
    let grad = |theta: &[f64], _: usize| -> Result<Vec<f64>> {
        let mut g: Vec<f64> = xy.iter().map(|v| -v).collect();
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (gi, m) in g.iter_mut().zip(moments.projected(theta, k)?) {
                *gi += c * m;
            }
        }
        Ok(g)
    };
    let (beta, trace) = approx_gd(grad, &vec![0.0; d], &gd)?;
    Ok((RegressionResult { beta }, trace))
}
