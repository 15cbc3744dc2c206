//! Dense row-major tensors and the multilinear algebra used to store and
//! transform moment and cumulant tensors.
//!
//! A tensor of order `t` with dims `(d_1, ..., d_t)` stores entry
//! `(i_1, ..., i_t)` at flat offset `((i_1 * d_2 + i_2) * d_3 + ...) + i_t`,
//! so the last index varies fastest.

mod linalg;

pub use linalg::{
    kronecker, pinv, pinv_rank, singular_values, smallest_singular_value, spectral_norm, symmetric_eigen,
    LinearMap, DEFAULT_RANK_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        DenseTensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(RcaError::InvalidOrder {
                order: 0,
                reason: "tensors need at least one mode",
            });
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(RcaError::InvalidInput(format!(
                "tensor dims must be positive, got {dims:?}"
            )));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(RcaError::InvalidInput(format!(
                "tensor with dims {dims:?} needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(DenseTensor { dims, data })
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut out = DenseTensor::zeros(dims);
        let mut idx = vec![0usize; dims.len()];
        for slot in out.data.iter_mut() {
            *slot = f(&idx);
            increment(&mut idx, dims);
        }
        out
    }

    pub fn from_vector(v: &[f64]) -> Self {
        DenseTensor {
            dims: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn from_matrix(m: &LinearMap) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        DenseTensor {
            dims: vec![m.nrows(), m.ncols()],
            data,
        }
    }

    /// Outer product `v_1 ⊗ v_2 ⊗ ... ⊗ v_t`.
    pub fn outer(vectors: &[&[f64]]) -> Self {
        let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        let mut data = vec![1.0];
        for v in vectors {
            let mut next = Vec::with_capacity(data.len() * v.len());
            for &a in &data {
                next.extend(v.iter().map(|&b| a * b));
            }
            data = next;
        }
        DenseTensor { dims, data }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// Flattens to a `(d_1 ... d_{t-1}) x d_t` matrix; the last mode becomes the column index.
    pub fn unfold(&self) -> Result<LinearMap> {
        if self.order() < 2 {
            return Err(RcaError::InvalidOrder {
                order: self.order(),
                reason: "unfolding needs order >= 2",
            });
        }
        let cols = *self.dims.last().unwrap();
        let rows = self.data.len() / cols;
        Ok(LinearMap::from_row_slice(rows, cols, &self.data))
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &LinearMap, dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(RcaError::InvalidOrder {
                order: dims.len(),
                reason: "folding needs order >= 2",
            });
        }
        let cols = *dims.last().unwrap();
        let rows: usize = dims[..dims.len() - 1].iter().product();
        if m.nrows() != rows || m.ncols() != cols {
            return Err(RcaError::InvalidInput(format!(
                "cannot fold a {}x{} matrix into dims {dims:?}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(m[(r, c)]);
            }
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn to_matrix(&self) -> Result<LinearMap> {
        if self.order() != 2 {
            return Err(RcaError::InvalidOrder {
                order: self.order(),
                reason: "matrix view needs order 2",
            });
        }
        self.unfold()
    }

    /// `T(M_1, ..., M_t)`: entry `(i_1..i_t)` is `sum_j T_j prod_l M_l[j_l, i_l]`.
    ///
    /// For a moment tensor of `X` this equals the moment tensor of
    /// `(M_1^T X, ..., M_t^T X)`.
    pub fn multilinear_apply(&self, maps: &[LinearMap]) -> Result<Self> {
        if maps.len() != self.order() {
            return Err(RcaError::InvalidInput(format!(
                "multilinear_apply needs {} maps, got {}",
                self.order(),
                maps.len()
            )));
        }
        for (mode, m) in maps.iter().enumerate() {
            if m.nrows() != self.dims[mode] {
                return Err(RcaError::Shape {
                    mode,
                    expected: self.dims[mode],
                    found: m.nrows(),
                });
            }
        }
        let mut out = self.clone();
        for (mode, m) in maps.iter().enumerate() {
            out = out.mode_product(mode, m);
        }
        Ok(out)
    }

    /// Applies `m` on a single mode, leaving the others untouched.
    pub fn apply_on_mode(&self, mode: usize, m: &LinearMap) -> Result<Self> {
        if mode >= self.order() {
            return Err(RcaError::InvalidInput(format!(
                "mode {mode} out of range for order {}",
                self.order()
            )));
        }
        if m.nrows() != self.dims[mode] {
            return Err(RcaError::Shape {
                mode,
                expected: self.dims[mode],
                found: m.nrows(),
            });
        }
        Ok(self.mode_product(mode, m))
    }

    fn mode_product(&self, mode: usize, m: &LinearMap) -> Self {
        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        let d_in = self.dims[mode];
        let d_out = m.ncols();
        let mut dims = self.dims.clone();
        dims[mode] = d_out;
        let mut data = vec![0.0; left * d_out * right];
        for a in 0..left {
            for j in 0..d_in {
                let src = &self.data[(a * d_in + j) * right..(a * d_in + j + 1) * right];
                for i in 0..d_out {
                    let w = m[(j, i)];
                    if w == 0.0 {
                        continue;
                    }
                    let dst = &mut data[(a * d_out + i) * right..(a * d_out + i + 1) * right];
                    for (o, &s) in dst.iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
        }
        DenseTensor { dims, data }
    }

    /// Contracts `mode` with the vector `v`, dropping that mode.
    pub fn contract_mode(&self, mode: usize, v: &[f64]) -> Result<Self> {
        if mode >= self.order() {
            return Err(RcaError::InvalidInput(format!(
                "mode {mode} out of range for order {}",
                self.order()
            )));
        }
        if v.len() != self.dims[mode] {
            return Err(RcaError::Shape {
                mode,
                expected: self.dims[mode],
                found: v.len(),
            });
        }
        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        let d = self.dims[mode];
        let mut data = vec![0.0; left * right];
        for a in 0..left {
            for (j, &w) in v.iter().enumerate() {
                let src = &self.data[(a * d + j) * right..(a * d + j + 1) * right];
                for (o, &s) in data[a * right..(a + 1) * right].iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(mode);
        if dims.is_empty() {
            dims.push(1);
        }
        Ok(DenseTensor { dims, data })
    }

    /// Contracts every mode from `first` onwards with `v`; returns the remaining entries.
    pub fn contract_trailing(&self, first: usize, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.clone();
        for mode in (first..self.order()).rev() {
            out = out.contract_mode(mode, v)?;
        }
        Ok(out.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        assert_eq!(self.dims, other.dims, "dims differ");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn check_same_dims(&self, other: &DenseTensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(RcaError::InvalidInput(format!(
                "tensor dims differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseTensor) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    fn zip_map(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Self {
        DenseTensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Reorders modes so that output mode `l` is input mode `perm[l]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let t = self.order();
        let mut seen = vec![false; t];
        if perm.len() != t || perm.iter().any(|&p| p >= t || std::mem::replace(&mut seen[p], true))
        {
            return Err(RcaError::InvalidInput(format!(
                "{perm:?} is not a permutation of {t} modes"
            )));
        }
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let src_strides = self.strides();
        let mut src_idx = vec![0usize; t];
        Ok(DenseTensor::from_fn(&dims, |idx| {
            for (l, &p) in perm.iter().enumerate() {
                src_idx[p] = idx[l];
            }
            let off: usize = src_idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
            self.data[off]
        }))
    }

    /// Average over all mode permutations. Requires all dims equal.
    pub fn symmetrize(&self) -> Result<Self> {
        let t = self.order();
        if self.dims.iter().any(|&d| d != self.dims[0]) {
            return Err(RcaError::InvalidInput(format!(
                "symmetrize needs equal dims, got {:?}",
                self.dims
            )));
        }
        let perms = permutations(t);
        let mut acc = DenseTensor::zeros(&self.dims);
        for p in &perms {
            acc.axpy(1.0, &self.permute_modes(p)?)?;
        }
        Ok(acc.scale(1.0 / perms.len() as f64))
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for l in (0..dims.len().saturating_sub(1)).rev() {
        s[l] = s[l + 1] * dims[l + 1];
    }
    s
}

/// Row-major odometer increment. Wraps to all zeros after the last index.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for l in (0..idx.len()).rev() {
        idx[l] += 1;
        if idx[l] < dims[l] {
            return;
        }
        idx[l] = 0;
    }
}

pub(crate) fn permutations(t: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; t], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0))
    }

    fn random_map(r: usize, c: usize, rng: &mut ChaCha8Rng) -> LinearMap {
        LinearMap::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn unfold_rank_one_outer_product() {
        let t = DenseTensor::outer(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let m = t.unfold().unwrap();
        assert_eq!(m, LinearMap::from_row_slice(2, 2, &[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn unfold_all_ones_order_three() {
        let t = DenseTensor::from_vec(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        let m = t.unfold().unwrap();
        assert_eq!((m.nrows(), m.ncols()), (4, 2));
        assert!(m.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn unfold_rejects_order_one() {
        let t = DenseTensor::from_vector(&[1.0, 2.0]);
        assert!(matches!(t.unfold(), Err(RcaError::InvalidOrder { .. })));
    }

    #[test]
    fn unfold_refold_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tensor(&[3, 3, 3], &mut rng);
        let back = DenseTensor::fold(&t.unfold().unwrap(), t.dims()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn unfold_index_mapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_tensor(&[2, 3, 4], &mut rng);
        let m = t.unfold().unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(m[(i * 3 + j, k)], t.get(&[i, j, k]));
                }
            }
        }
    }

    #[test]
    fn multilinear_identity_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tensor(&[3, 2, 4], &mut rng);
        let maps: Vec<LinearMap> = t.dims().iter().map(|&d| LinearMap::identity(d, d)).collect();
        assert_eq!(t.multilinear_apply(&maps).unwrap(), t);
    }

    #[test]
    fn multilinear_bilinear_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tensor(&[3, 4], &mut rng);
        let m1 = random_map(3, 2, &mut rng);
        let m2 = random_map(4, 5, &mut rng);
        let got = t.multilinear_apply(&[m1.clone(), m2.clone()]).unwrap();
        let want = m1.transpose() * t.to_matrix().unwrap() * m2;
        let diff = (got.to_matrix().unwrap() - want).abs().max();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn multilinear_rank_one_against_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = DenseTensor::outer(&[&a, &b, &c]);
        let maps = [
            random_map(3, 2, &mut rng),
            random_map(2, 3, &mut rng),
            random_map(4, 2, &mut rng),
        ];
        let got = t.multilinear_apply(&maps).unwrap();
        // direct summation over every index tuple
        let direct = DenseTensor::from_fn(&[2, 3, 2], |i| {
            let mut s = 0.0;
            for j0 in 0..3 {
                for j1 in 0..2 {
                    for j2 in 0..4 {
                        s += t.get(&[j0, j1, j2])
                            * maps[0][(j0, i[0])]
                            * maps[1][(j1, i[1])]
                            * maps[2][(j2, i[2])];
                    }
                }
            }
            s
        });
        assert!(got.max_abs_diff(&direct) < 1e-12);
        let ma = maps[0].transpose() * LinearMap::from_column_slice(3, 1, &a);
        let mb = maps[1].transpose() * LinearMap::from_column_slice(2, 1, &b);
        let mc = maps[2].transpose() * LinearMap::from_column_slice(4, 1, &c);
        let outer = DenseTensor::outer(&[ma.as_slice(), mb.as_slice(), mc.as_slice()]);
        assert!(got.max_abs_diff(&outer) < 1e-12);
    }

    #[test]
    fn multilinear_shape_error_names_mode() {
        let t = DenseTensor::zeros(&[2, 3]);
        let err = t
            .multilinear_apply(&[LinearMap::identity(2, 2), LinearMap::identity(2, 2)])
            .unwrap_err();
        assert!(matches!(err, RcaError::Shape { mode: 1, .. }));
    }

    #[test]
    fn frobenius_of_all_ones() {
        let t = DenseTensor::from_vec(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        assert!((t.frobenius_norm() - 8f64.sqrt()).abs() < 1e-15);
        assert!((t.unfold().unwrap().norm() - t.frobenius_norm()).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = random_tensor(&[3, 3, 3], &mut rng).symmetrize().unwrap();
        let p = t.permute_modes(&[2, 0, 1]).unwrap();
        assert!(t.max_abs_diff(&p) < 1e-15);
    }

    #[test]
    fn contract_trailing_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tensor(&[3, 3, 3], &mut rng);
        let v = [0.3, -0.2, 0.7];
        let got = t.contract_trailing(1, &v).unwrap();
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    s += t.get(&[i, j, k]) * v[j] * v[k];
                }
            }
            assert!((got[i] - s).abs() < 1e-14);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn multilinear_apply_composes(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = random_tensor(&[3, 2, 3], &mut rng);
                let m: Vec<LinearMap> = vec![random_map(3, 4, &mut rng), random_map(2, 2, &mut rng), random_map(3, 3, &mut rng)];
                let n: Vec<LinearMap> = vec![random_map(4, 2, &mut rng), random_map(2, 3, &mut rng), random_map(3, 2, &mut rng)];
                let two_step = t.multilinear_apply(&m).unwrap().multilinear_apply(&n).unwrap();
                let mn: Vec<LinearMap> = m.iter().zip(&n).map(|(a, b)| a * b).collect();
                let one_step = t.multilinear_apply(&mn).unwrap();
                let rel = two_step.sub(&one_step).unwrap().frobenius_norm() / one_step.frobenius_norm().max(1e-300);
                prop_assert!(rel < 1e-10);
            }

            #[test]
            fn unfold_fold_roundtrip(seed in any::<u64>(), d0 in 1usize..4, d1 in 1usize..4, d2 in 1usize..4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = random_tensor(&[d0, d1, d2], &mut rng);
                let back = DenseTensor::fold(&t.unfold().unwrap(), t.dims()).unwrap();
                prop_assert_eq!(back, t);
            }
        }
    }
}
