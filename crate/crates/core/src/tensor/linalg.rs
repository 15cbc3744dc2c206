use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{RcaError, Result};

/// A real `rows x cols` matrix. Used for cross-view maps and unfoldings.
pub type LinearMap = DMatrix<f64>;

/// Relative singular-value cutoff used by every pseudoinverse unless overridden.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Kronecker product with the `A[i,j] * B` block layout.
pub fn kronecker(a: &LinearMap, b: &LinearMap) -> LinearMap {
    a.kronecker(b)
}

/// Singular values in descending order.
pub fn singular_values(m: &LinearMap) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn smallest_singular_value(m: &LinearMap) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn spectral_norm(m: &LinearMap) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Moore-Penrose pseudoinverse. Singular values at or below
/// `rank_tol * sigma_max` are treated as zero.
pub fn pinv(m: &LinearMap, rank_tol: f64) -> Result<LinearMap> {
    if rank_tol.is_nan() || rank_tol < 0.0 {
        return Err(RcaError::InvalidInput(format!("rank_tol must be >= 0, got {rank_tol}")));
    }
    truncated_pinv(m, |_, sk, smax| sk > rank_tol * smax)
}

/// Pseudoinverse keeping only the `rank` largest singular values.
pub fn pinv_rank(m: &LinearMap, rank: usize) -> Result<LinearMap> {
    if rank == 0 {
        return Err(RcaError::InvalidInput("pseudoinverse rank must be >= 1".into()));
    }
    truncated_pinv(m, |position, _, _| position < rank)
}

/// `keep(position, sigma, sigma_max)` decides which singular triplets enter,
/// with `position` counted from the largest singular value.
fn truncated_pinv(m: &LinearMap, keep: impl Fn(usize, f64, f64) -> bool) -> Result<LinearMap> {
    if m.is_empty() {
        return Err(RcaError::InvalidInput("pseudoinverse of an empty matrix".into()));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(RcaError::Numeric("pseudoinverse of a non-finite matrix".into()));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let smax = s[order[0]];
    let mut out = LinearMap::zeros(m.ncols(), m.nrows());
    for (position, &k) in order.iter().enumerate() {
        let sk = s[k];
        if sk == 0.0 || !keep(position, sk, smax) {
            continue;
        }
        let inv = 1.0 / sk;
        // out += v_k u_k^T / s_k
        for r in 0..m.ncols() {
            let vr = v_t[(k, r)] * inv;
            if vr == 0.0 {
                continue;
            }
            for c in 0..m.nrows() {
                out[(r, c)] += vr * u[(c, k)];
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of the symmetric part of `m`, eigenvalues ascending.
/// Column `k` of the returned matrix is the eigenvector of value `k`.
pub fn symmetric_eigen(m: &LinearMap) -> (Vec<f64>, LinearMap) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = LinearMap::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(r: usize, c: usize, rng: &mut ChaCha8Rng) -> LinearMap {
        LinearMap::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn kronecker_identities() {
        assert_eq!(
            kronecker(&LinearMap::identity(2, 2), &LinearMap::identity(2, 2)),
            LinearMap::identity(4, 4)
        );
        let a = LinearMap::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let b = LinearMap::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 7.0]));
        let want = LinearMap::from_diagonal(&nalgebra::DVector::from_vec(vec![10.0, 14.0, 15.0, 21.0]));
        assert_eq!(kronecker(&a, &b), want);
    }

    #[test]
    fn kronecker_block_layout() {
        let a = LinearMap::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = LinearMap::from_row_slice(1, 2, &[5.0, 6.0]);
        let k = kronecker(&a, &b);
        assert_eq!(k, LinearMap::from_row_slice(2, 4, &[5.0, 6.0, 10.0, 12.0, 15.0, 18.0, 20.0, 24.0]));
    }

    #[test]
    fn kronecker_singular_values_are_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_map(2, 2, &mut rng);
        let b = random_map(2, 2, &mut rng);
        let got = singular_values(&kronecker(&a, &b));
        let sa = singular_values(&a);
        let sb = singular_values(&b);
        let mut want: Vec<f64> = sa.iter().flat_map(|x| sb.iter().map(move |y| x * y)).collect();
        want.sort_by(|x, y| y.total_cmp(x));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }

    #[test]
    fn kronecker_frobenius_is_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_map(3, 2, &mut rng);
        let b = random_map(2, 4, &mut rng);
        assert!((kronecker(&a, &b).norm() - a.norm() * b.norm()).abs() < 1e-12);
    }

    #[test]
    fn kronecker_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_map(2, 3, &mut rng);
        let b = random_map(2, 2, &mut rng);
        let c = random_map(3, 1, &mut rng);
        let l = kronecker(&kronecker(&a, &b), &c);
        let r = kronecker(&a, &kronecker(&b, &c));
        assert!((l - r).abs().max() < 1e-14);
    }

    #[test]
    fn pinv_of_identity_and_diagonal() {
        let i3 = LinearMap::identity(3, 3);
        assert!((pinv(&i3, DEFAULT_RANK_TOL).unwrap() - &i3).abs().max() < 1e-15);
        let d = LinearMap::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pinv(&d, 1e-10).unwrap();
        assert_eq!(p, LinearMap::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn rank_truncated_pinv() {
        let d = LinearMap::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let p = pinv_rank(&d, 2).unwrap();
        assert_eq!(p, LinearMap::from_row_slice(3, 3, &[0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]));
        assert_eq!(pinv_rank(&d, 5).unwrap(), pinv(&d, 0.0).unwrap());
        assert!(pinv_rank(&d, 0).is_err());
    }

    #[test]
    fn pinv_rejects_empty() {
        let e = LinearMap::zeros(0, 0);
        assert!(matches!(pinv(&e, 1e-10), Err(RcaError::InvalidInput(_))));
    }

    #[test]
    fn pinv_left_inverse_of_tall_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m = random_map(20, 4, &mut rng);
        let p = pinv(&m, DEFAULT_RANK_TOL).unwrap();
        assert!((&p * &m - LinearMap::identity(4, 4)).abs().max() < 1e-8);
    }

    #[test]
    fn pinv_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for (r, c) in [(6, 3), (3, 6), (4, 4)] {
            let a = random_map(r, c, &mut rng);
            let p = pinv(&a, DEFAULT_RANK_TOL).unwrap();
            assert!((&a * &p * &a - &a).abs().max() < 1e-8);
            assert!((&p * &a * &p - &p).abs().max() < 1e-8);
            let ap = &a * &p;
            let pa = &p * &a;
            assert!((&ap - ap.transpose()).abs().max() < 1e-8);
            assert!((&pa - pa.transpose()).abs().max() < 1e-8);
        }
    }

    #[test]
    fn sigma_min_of_identity_and_random() {
        assert!((smallest_singular_value(&LinearMap::identity(5, 5)) - 1.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let m = random_map(6, 4, &mut rng);
        // oracle: sqrt of the smallest eigenvalue of M^T M
        let (vals, _) = symmetric_eigen(&(m.transpose() * &m));
        assert!((smallest_singular_value(&m) - vals[0].sqrt()).abs() < 1e-10);
    }

    #[test]
    fn symmetric_eigen_sorted() {
        let m = LinearMap::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        assert!((vecs[(0, 1)].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
