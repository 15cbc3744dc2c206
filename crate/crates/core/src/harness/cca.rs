use serde::{Deserialize, Serialize};

use crate::cumulant::SampleMatrix;
use crate::error::{RcaError, Result};
use crate::tensor::{symmetric_eigen, LinearMap};

/// Relative eigenvalue floor below which a covariance counts as singular.
const COV_RANK_TOL: f64 = 1e-10;

/// Linear CCA between two views and the projector removing the correlated
/// directions of the first view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaProjection {
    /// Canonical correlations, descending.
    pub correlations: Vec<f64>,
    /// Number of directions with correlation above the threshold.
    pub removed: usize,
    /// Orthogonal projector onto the complement of the removed directions.
    pub projector: LinearMap,
    /// Every direction was removed.
    pub unidentifiable: bool,
}

fn inverse_sqrt(cov: &LinearMap) -> Result<LinearMap> {
    let (vals, vecs) = symmetric_eigen(cov);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 || vals[0] <= COV_RANK_TOL * top {
        return Err(RcaError::Rank {
            sigma: vals[0],
            threshold: COV_RANK_TOL * top,
        });
    }
    let d = LinearMap::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| 1.0 / v.sqrt()),
    ));
    Ok(&vecs * d * vecs.transpose())
}

fn cross_covariance(u: &SampleMatrix, v: &SampleMatrix) -> LinearMap {
    let (uc, vc) = (u.centered().to_matrix(), v.centered().to_matrix());
    uc.transpose() * vc / u.n() as f64
}

/// Canonical directions `a_k = Cuu^{-1/2} p_k` from the SVD of the whitened
/// cross-covariance; those with correlation above `threshold` span the
/// removed subspace.
pub fn cca_projection(u: &SampleMatrix, v: &SampleMatrix, threshold: f64) -> Result<CcaProjection> {
    if u.n() != v.n() {
        return Err(RcaError::Alignment {
            index: 1,
            expected: u.n(),
            found: v.n(),
        });
    }
    let wu = inverse_sqrt(&u.covariance())?;
    let wv = inverse_sqrt(&v.covariance())?;
    let k = &wu * cross_covariance(u, v) * &wv;
    let svd = k.svd(true, false);
    let p = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let correlations: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].min(1.0)).collect();
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] > threshold)
        .collect();
    let d = u.d();
    let projector = if keep.is_empty() {
        LinearMap::identity(d, d)
    } else {
        let dirs = LinearMap::from_fn(d, keep.len(), |r, c| (&wu * p.column(keep[c]))[r]);
        let q = dirs.qr().q();
        LinearMap::identity(d, d) - &q * q.transpose()
    };
    Ok(CcaProjection {
        correlations,
        removed: keep.len(),
        projector,
        unidentifiable: keep.len() >= d,
    })
}

/// `u` with its canonically correlated directions projected out.
pub fn cca_project(u: &SampleMatrix, v: &SampleMatrix, threshold: f64) -> Result<(SampleMatrix, CcaProjection)> {
    let proj = cca_projection(u, v, threshold)?;
    Ok((u.transform(&proj.projector)?, proj))
}
