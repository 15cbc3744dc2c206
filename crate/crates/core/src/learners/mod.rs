//! Method-of-moments learners that only see component cumulants: PCA,
//! least-squares regression and spherical Gaussian mixtures.

mod assignment;
mod gmm;

pub use assignment::min_cost_assignment;
pub use gmm::{contrastive_gmm, cp_als, matched_center_mse, CpDecomposition, GmmOptions, GmmResult};

use serde::{Deserialize, Serialize};

use crate::cumulant::ComponentCumulants;
use crate::error::{RcaError, Result};
use crate::tensor::{pinv, singular_values, symmetric_eigen, LinearMap, DEFAULT_RANK_TOL};

/// Eigengaps below this (relative to the top eigenvalue, floor 1) make the
/// top direction unidentifiable.
pub const EIGENGAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub top_eigenvector: Vec<f64>,
    pub eigenvalue: f64,
    pub eigengap: f64,
    pub unidentifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub beta: Vec<f64>,
}

/// Flips `v` so that its first non-negligible coordinate is positive.
pub fn canonical_sign(v: &mut [f64]) {
    if let Some(&x) = v.iter().find(|x| x.abs() > 1e-12) {
        if x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

/// Top eigenvector of the symmetric part of `m`.
pub fn top_eigenvector(m: &LinearMap) -> Result<PcaResult> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(RcaError::Numeric("non-finite second-order tensor".into()));
    }
    let (vals, vecs) = symmetric_eigen(m);
    let top = vals.len() - 1;
    let mut v: Vec<f64> = vecs.column(top).iter().copied().collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    canonical_sign(&mut v);
    let gap = if top == 0 { f64::INFINITY } else { vals[top] - vals[top - 1] };
    Ok(PcaResult {
        top_eigenvector: v,
        eigenvalue: vals[top],
        eigengap: gap,
        unidentifiable: gap < EIGENGAP_TOL * vals[top].abs().max(1.0),
    })
}

/// Top principal direction from the second-order cumulant of a component.
pub fn contrastive_pca(component: &ComponentCumulants) -> Result<PcaResult> {
    top_eigenvector(&component.covariance()?)
}

/// `beta = pinv(E[X X^T]) E[Y X]` with the second moment rebuilt from the
/// component's covariance and mean.
pub fn contrastive_lsr(component: &ComponentCumulants, xy_moment: &[f64]) -> Result<RegressionResult> {
    least_squares(&component.second_moment()?, xy_moment)
}

/// Solves the normal equations `m beta = xy`, rejecting singular `m`.
pub fn least_squares(m: &LinearMap, xy: &[f64]) -> Result<RegressionResult> {
    if xy.len() != m.nrows() {
        return Err(RcaError::Shape {
            mode: 0,
            expected: m.nrows(),
            found: xy.len(),
        });
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(RcaError::Numeric("non-finite moment matrix".into()));
    }
    let s = singular_values(m);
    let smin = *s.last().unwrap();
    let threshold = DEFAULT_RANK_TOL * s[0];
    if s[0] == 0.0 || smin <= threshold {
        return Err(RcaError::Rank { sigma: smin, threshold });
    }
    let beta = pinv(m, DEFAULT_RANK_TOL)? * nalgebra::DVector::from_column_slice(xy);
    Ok(RegressionResult {
        beta: beta.iter().copied().collect(),
    })
}

/// Mean squared error per coordinate.
pub fn mse(estimate: &[f64], truth: &[f64]) -> f64 {
    estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64
}

/// Per-coordinate MSE of a direction estimate, after choosing the sign that fits best.
pub fn direction_mse(estimate: &[f64], truth: &[f64]) -> f64 {
    let flipped: Vec<f64> = estimate.iter().map(|x| -x).collect();
    mse(estimate, truth).min(mse(&flipped, truth))
}
