use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::min_cost_assignment;
use crate::cumulant::ComponentCumulants;
use crate::error::{RcaError, Result};
use crate::tensor::{pinv, symmetric_eigen, DenseTensor, LinearMap, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub ls_iters: usize,
    pub restarts: usize,
    /// Stop once the relative residual changes by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            ls_iters: 200,
            restarts: 10,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmResult {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sigma2: f64,
    /// Relative residual of the kept decomposition.
    pub residual: f64,
}

/// Rank-`r` CP model `sum_r lambda_r a_r ⊗ b_r ⊗ c_r` with unit factor columns.
#[derive(Debug, Clone)]
pub struct CpDecomposition {
    pub lambda: Vec<f64>,
    pub factors: [LinearMap; 3],
    pub residual: f64,
    pub converged: bool,
}

fn reconstruct(lambda: &[f64], f: &[LinearMap; 3], dims: &[usize]) -> DenseTensor {
    DenseTensor::from_fn(dims, |i| {
        (0..lambda.len())
            .map(|r| lambda[r] * f[0][(i[0], r)] * f[1][(i[1], r)] * f[2][(i[2], r)])
            .sum()
    })
}

/// `sum_{other modes} T * prod factor` for the mode-`n` ALS update.
fn mttkrp(t: &DenseTensor, f: &[LinearMap; 3], mode: usize, rank: usize) -> LinearMap {
    let dims = t.dims();
    let mut out = LinearMap::zeros(dims[mode], rank);
    let mut idx = [0usize; 3];
    for &x in t.data() {
        if x != 0.0 {
            for r in 0..rank {
                let mut p = x;
                for (m, fm) in f.iter().enumerate() {
                    if m != mode {
                        p *= fm[(idx[m], r)];
                    }
                }
                out[(idx[mode], r)] += p;
            }
        }
        crate::tensor::increment(&mut idx, dims);
    }
    out
}

/// Rank-`rank` CP decomposition of an order-3 tensor by alternating least
/// squares, keeping the best of `opts.restarts` random starts.
pub fn cp_als(t: &DenseTensor, rank: usize, opts: &GmmOptions) -> Result<CpDecomposition> {
    if t.order() != 3 {
        return Err(RcaError::InvalidOrder {
            order: t.order(),
            reason: "CP-ALS expects an order-3 tensor",
        });
    }
    if rank == 0 || opts.restarts == 0 || opts.ls_iters == 0 {
        return Err(RcaError::InvalidInput("rank, restarts and ls_iters must be positive".into()));
    }
    let norm = t.frobenius_norm();
    if !norm.is_finite() {
        return Err(RcaError::Numeric("non-finite tensor".into()));
    }
    let dims = t.dims().to_vec();
    if norm == 0.0 {
        return Ok(CpDecomposition {
            lambda: vec![0.0; rank],
            factors: [0, 1, 2].map(|m| LinearMap::from_fn(dims[m], rank, |i, r| if i == r % dims[m] { 1.0 } else { 0.0 })),
            residual: 0.0,
            converged: true,
        });
    }
    let mut best: Option<CpDecomposition> = None;
    for restart in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let mut f: [LinearMap; 3] =
            [0, 1, 2].map(|m| LinearMap::from_fn(dims[m], rank, |_, _| StandardNormal.sample(&mut rng)));
        let mut lambda = vec![1.0; rank];
        let mut prev = f64::INFINITY;
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..opts.ls_iters {
            for mode in 0..3 {
                let mut gram = LinearMap::from_element(rank, rank, 1.0);
                for (m, fm) in f.iter().enumerate() {
                    if m != mode {
                        gram.component_mul_assign(&(fm.transpose() * fm));
                    }
                }
                let mut next = mttkrp(t, &f, mode, rank) * pinv(&gram, DEFAULT_RANK_TOL)?;
                for r in 0..rank {
                    let n = next.column(r).norm();
                    lambda[r] = n;
                    if n > 0.0 {
                        next.column_mut(r).scale_mut(1.0 / n);
                    }
                }
                f[mode] = next;
            }
            residual = reconstruct(&lambda, &f, &dims).sub(t)?.frobenius_norm() / norm;
            if !residual.is_finite() {
                break;
            }
            if (prev - residual).abs() < opts.tol {
                converged = true;
                break;
            }
            prev = residual;
        }
        if !residual.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => (converged && !b.converged) || (converged == b.converged && residual < b.residual),
        };
        if better {
            best = Some(CpDecomposition {
                lambda: lambda.clone(),
                factors: f,
                residual,
                converged,
            });
        }
    }
    match best {
        Some(b) if b.converged => Ok(b),
        Some(b) => Err(RcaError::Convergence { best_residual: b.residual }),
        None => Err(RcaError::Convergence {
            best_residual: f64::INFINITY,
        }),
    }
}

/// Spherical mixture fit from the first three moments of a component.
///
/// The third moment is corrected for the isotropic noise (variance taken as
/// the smallest covariance eigenvalue) to leave `sum_k w_k mu_k^{⊗3}`, which is
/// decomposed by CP-ALS. Weights and scales follow from matching the
/// noise-corrected second moment.
pub fn contrastive_gmm(component: &ComponentCumulants, k: usize, opts: &GmmOptions) -> Result<GmmResult> {
    let d = component.dim();
    if k == 0 || k > d {
        return Err(RcaError::InvalidInput(format!("need 1 <= k <= d = {d}, got k = {k}")));
    }
    let cov = component.covariance()?;
    let (vals, _) = symmetric_eigen(&cov);
    let sigma2 = vals[0].max(0.0);
    let mean = &component.mean;
    let m3 = component.raw_moment(3)?;
    let corrected = DenseTensor::from_fn(&[d, d, d], |i| {
        let (a, b, c) = (i[0], i[1], i[2]);
        let mut noise = 0.0;
        if b == c {
            noise += mean[a];
        }
        if a == c {
            noise += mean[b];
        }
        if a == b {
            noise += mean[c];
        }
        m3.get(i) - sigma2 * noise
    });
    let m2 = component.second_moment()? - LinearMap::identity(d, d) * sigma2;

    let cp = cp_als(&corrected, k, opts)?;
    // symmetric directions from the three factor columns
    let mut dirs: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            let a = cp.factors[0].column(r);
            let sb = a.dot(&cp.factors[1].column(r)).signum();
            let sc = a.dot(&cp.factors[2].column(r)).signum();
            let v = a + cp.factors[1].column(r) * sb + cp.factors[2].column(r) * sc;
            let n = v.norm();
            v.iter().map(|x| x / n).collect()
        })
        .collect();

    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let fit = |power: i32, rhs: Vec<f64>, dirs: &[Vec<f64>]| -> Result<Vec<f64>> {
        let g = LinearMap::from_fn(k, k, |r, s| dot(&dirs[r], &dirs[s]).powi(power));
        let x = pinv(&g, DEFAULT_RANK_TOL)? * nalgebra::DVector::from_vec(rhs);
        Ok(x.iter().copied().collect())
    };
    let cubic = dirs
        .iter()
        .map(|v| Ok(dot(&corrected.contract_trailing(1, v)?, v)))
        .collect::<Result<Vec<f64>>>()?;
    let lambda = fit(3, cubic, &dirs)?;
    for (v, l) in dirs.iter_mut().zip(&lambda) {
        if *l < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let lambda: Vec<f64> = lambda.iter().map(|l| l.abs()).collect();
    let quad: Vec<f64> = dirs
        .iter()
        .map(|v| {
            let mv = &m2 * nalgebra::DVector::from_column_slice(v);
            dot(v, mv.as_slice())
        })
        .collect();
    let c = fit(2, quad, &dirs)?;
    let c_floor = 1e-8 * c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(r) = c.iter().position(|&x| !(x > c_floor)) {
        return Err(RcaError::Numeric(format!(
            "component {r} has non-positive second-moment weight {:.3e}",
            c[r]
        )));
    }

    let mut centers = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for r in 0..k {
        // lambda = w |mu|^3, c = w |mu|^2
        let cr = c[r];
        let lr = lambda[r].max(f64::EPSILON);
        let scale = lr / cr;
        weights.push(cr * cr * cr / (lr * lr));
        centers.push(dirs[r].iter().map(|x| x * scale).collect::<Vec<f64>>());
    }
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) || centers.iter().flatten().any(|x| !x.is_finite()) {
        return Err(RcaError::Numeric("mixture weights could not be normalized".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(GmmResult {
        centers,
        weights,
        sigma2,
        residual: cp.residual,
    })
}

/// Per-coordinate MSE between estimated and true centers after the
/// minimum-cost matching.
pub fn matched_center_mse(estimate: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    assert_eq!(estimate.len(), truth.len(), "center counts differ");
    let cost: Vec<Vec<f64>> = estimate
        .iter()
        .map(|e| truth.iter().map(|t| e.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum()).collect())
        .collect();
    let perm = min_cost_assignment(&cost);
    let d = truth.first().map_or(1, |t| t.len());
    perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>() / (truth.len() * d) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact cumulants of `sum_k w_k N(mu_k, sigma2 I)`.
    pub(crate) fn mixture_cumulants(centers: &[Vec<f64>], weights: &[f64], sigma2: f64) -> ComponentCumulants {
        let d = centers[0].len();
        let mean: Vec<f64> = (0..d).map(|i| centers.iter().zip(weights).map(|(c, w)| w * c[i]).sum()).collect();
        let m2 = DenseTensor::from_fn(&[d, d], |i| {
            centers.iter().zip(weights).map(|(c, w)| w * c[i[0]] * c[i[1]]).sum::<f64>()
                + if i[0] == i[1] { sigma2 } else { 0.0 }
        });
        let m3 = DenseTensor::from_fn(&[d, d, d], |i| {
            let mut s: f64 = centers.iter().zip(weights).map(|(c, w)| w * c[i[0]] * c[i[1]] * c[i[2]]).sum();
            let (a, b, cc) = (i[0], i[1], i[2]);
            if b == cc {
                s += sigma2 * mean[a];
            }
            if a == cc {
                s += sigma2 * mean[b];
            }
            if a == b {
                s += sigma2 * mean[cc];
            }
            s
        });
        let k = crate::cumulant::moments_to_cumulants(&[DenseTensor::from_vector(&mean), m2, m3]).unwrap();
        let mut out = ComponentCumulants::new(mean);
        out.insert(2, k[1].clone());
        out.insert(3, k[2].clone());
        out
    }

    #[test]
    fn two_orthogonal_centers() {
        let centers = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let cc = mixture_cumulants(&centers, &[0.5, 0.5], 0.25);
        let r = contrastive_gmm(&cc, 2, &GmmOptions::default()).unwrap();
        assert!(matched_center_mse(&r.centers, &centers) < 1e-12, "{:?}", r.centers);
        for w in &r.weights {
            assert!((w - 0.5).abs() < 1e-6);
        }
        assert!((r.sigma2 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_component_is_the_mean() {
        let centers = vec![vec![0.3, -0.5, 0.2, 1.0]];
        let cc = mixture_cumulants(&centers, &[1.0], 0.1);
        let r = contrastive_gmm(&cc, 1, &GmmOptions::default()).unwrap();
        for (a, b) in r.centers[0].iter().zip(&cc.mean) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!((r.weights[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matched_mse_ignores_order() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let b = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(matched_center_mse(&a, &b), 0.0);
    }

    #[test]
    fn cp_als_recovers_rank_two() {
        let a = [1.0, 2.0, 0.0];
        let b = [0.0, 1.0, -1.0];
        let t = DenseTensor::outer(&[&a, &a, &a]).add(&DenseTensor::outer(&[&b, &b, &b]).scale(2.0)).unwrap();
        let cp = cp_als(&t, 2, &GmmOptions::default()).unwrap();
        assert!(cp.residual < 1e-6);
    }
}
