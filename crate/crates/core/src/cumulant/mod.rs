//! Empirical cross-cumulants of sample matrices via the partition formula,
//! moment/cumulant conversion and projected moments.

mod moments;
mod partition;
mod source;

pub use moments::{
    cumulants_to_moments, debiased_projected_moment, k_statistic, moments_to_cumulants,
    projected_moment, ComponentCumulants,
};
pub use partition::{partitions, Partition, MAX_ORDER};
pub use source::{CumulantSource, PopulationComponent, PopulationModel, SampleViews};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};
use crate::tensor::{DenseTensor, LinearMap};

/// `n x d` samples, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(RcaError::InvalidInput(format!(
                "sample matrix needs n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        if data.len() != n * d {
            return Err(RcaError::InvalidInput(format!(
                "sample matrix {n}x{d} needs {} values, got {}",
                n * d,
                data.len()
            )));
        }
        Ok(SampleMatrix { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(RcaError::InvalidInput("ragged sample rows".into()));
        }
        SampleMatrix::new(rows.len(), d, rows.concat())
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        SampleMatrix {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let inv = 1.0 / self.n as f64;
        m.iter_mut().for_each(|x| *x *= inv);
        m
    }

    pub fn centered(&self) -> SampleMatrix {
        let m = self.mean();
        let mut out = self.clone();
        for r in out.data.chunks_exact_mut(self.d) {
            for (a, b) in r.iter_mut().zip(&m) {
                *a -= b;
            }
        }
        out
    }

    /// Maps every sample `x` to `m x`.
    pub fn transform(&self, m: &LinearMap) -> Result<SampleMatrix> {
        if m.ncols() != self.d {
            return Err(RcaError::Shape {
                mode: 1,
                expected: self.d,
                found: m.ncols(),
            });
        }
        let d_out = m.nrows();
        let mut data = vec![0.0; self.n * d_out];
        for (r, out) in self.rows().zip(data.chunks_exact_mut(d_out)) {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..self.d).map(|j| m[(i, j)] * r[j]).sum();
            }
        }
        Ok(SampleMatrix {
            n: self.n,
            d: d_out,
            data,
        })
    }

    pub fn add(&self, other: &SampleMatrix) -> Result<SampleMatrix> {
        if self.n != other.n || self.d != other.d {
            return Err(RcaError::InvalidInput(format!(
                "cannot add {}x{} and {}x{} samples",
                self.n, self.d, other.n, other.d
            )));
        }
        Ok(SampleMatrix {
            n: self.n,
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, alpha: f64) -> SampleMatrix {
        SampleMatrix {
            n: self.n,
            d: self.d,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> SampleMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        SampleMatrix {
            n: idx.len(),
            d: self.d,
            data,
        }
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Empirical covariance (plug-in, divides by n).
    pub fn covariance(&self) -> LinearMap {
        let c = self.centered();
        let mut cov = LinearMap::zeros(self.d, self.d);
        for r in c.rows() {
            for i in 0..self.d {
                for j in i..self.d {
                    cov[(i, j)] += r[i] * r[j];
                }
            }
        }
        let inv = 1.0 / self.n as f64;
        for i in 0..self.d {
            for j in i..self.d {
                let v = cov[(i, j)] * inv;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    pub fn to_matrix(&self) -> LinearMap {
        LinearMap::from_row_slice(self.n, self.d, &self.data)
    }

    pub fn from_matrix(m: &LinearMap) -> Result<SampleMatrix> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        SampleMatrix::new(m.nrows(), m.ncols(), data)
    }
}

/// An estimated cross-cumulant tensor with its provenance.
#[derive(Debug, Clone)]
pub struct CumulantEstimate {
    pub tensor: DenseTensor,
    pub order: usize,
    /// Position of each input variable, in mode order.
    pub source_labels: Vec<usize>,
    pub n_samples: usize,
}

/// Empirical moment tensor `E[x_1 ⊗ ... ⊗ x_t]` of row-aligned inputs.
pub fn moment_tensor(inputs: &[&SampleMatrix]) -> Result<DenseTensor> {
    let n = check_aligned(inputs)?;
    let dims: Vec<usize> = inputs.iter().map(|x| x.d()).collect();
    let last = *dims.last().unwrap();
    let prefix_len: usize = dims[..dims.len() - 1].iter().product();
    let mut acc = vec![0.0; prefix_len * last];
    let mut prefix = Vec::with_capacity(prefix_len);
    let mut next = Vec::with_capacity(prefix_len);
    for r in 0..n {
        prefix.clear();
        prefix.push(1.0);
        for x in &inputs[..inputs.len() - 1] {
            next.clear();
            let row = x.row(r);
            for &a in &prefix {
                next.extend(row.iter().map(|&b| a * b));
            }
            std::mem::swap(&mut prefix, &mut next);
        }
        let row = inputs[inputs.len() - 1].row(r);
        for (p, &a) in prefix.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in acc[p * last..(p + 1) * last].iter_mut().zip(row) {
                *o += a * b;
            }
        }
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|x| *x *= inv);
    DenseTensor::from_vec(dims, acc)
}

fn check_aligned(inputs: &[&SampleMatrix]) -> Result<usize> {
    let first = inputs
        .first()
        .ok_or_else(|| RcaError::InvalidInput("need at least one input".into()))?;
    for (index, x) in inputs.iter().enumerate() {
        if x.n() != first.n() {
            return Err(RcaError::Alignment {
                index,
                expected: first.n(),
                found: x.n(),
            });
        }
    }
    Ok(first.n())
}

/// Plug-in estimate of `kappa_t(X_1, ..., X_t)`: empirical moments substituted
/// into the partition formula, with tensor products in mode order.
pub fn cross_cumulant(inputs: &[&SampleMatrix], center: bool) -> Result<CumulantEstimate> {
    let t = inputs.len();
    if t > MAX_ORDER {
        return Err(RcaError::OrderCap {
            order: t,
            cap: MAX_ORDER,
        });
    }
    let n = check_aligned(inputs)?;

    // identical inputs share centering and block moments
    let ids: Vec<usize> = (0..t)
        .map(|l| (0..=l).find(|&j| std::ptr::eq(inputs[j], inputs[l])).unwrap())
        .collect();
    let centered: Vec<Option<SampleMatrix>> = (0..t)
        .map(|l| (center && ids[l] == l).then(|| inputs[l].centered()))
        .collect();
    let data: Vec<&SampleMatrix> = (0..t)
        .map(|l| centered[ids[l]].as_ref().unwrap_or(inputs[l]))
        .collect();

    let mut by_ids: HashMap<Vec<usize>, DenseTensor> = HashMap::new();
    let mut by_mask: Vec<Option<Vec<usize>>> = vec![None; 1 << t];
    for mask in 1u32..(1 << t) {
        let members: Vec<usize> = partition::block_modes(mask).collect();
        let key: Vec<usize> = members.iter().map(|&l| ids[l]).collect();
        if !by_ids.contains_key(&key) {
            let block: Vec<&SampleMatrix> = members.iter().map(|&l| data[l]).collect();
            by_ids.insert(key.clone(), moment_tensor(&block)?);
        }
        by_mask[mask as usize] = Some(key);
    }

    let dims: Vec<usize> = inputs.iter().map(|x| x.d()).collect();
    let tensor = partition::partition_sum(
        &dims,
        |mask| &by_ids[by_mask[mask as usize].as_ref().unwrap()],
        |p| p.moebius_weight(),
    );
    Ok(CumulantEstimate {
        tensor,
        order: t,
        source_labels: (0..t).collect(),
        n_samples: n,
    })
}

/// Single entry of a plug-in cross-cumulant from scalar series.
///
/// Runs in `O(Bell(t) * n)`; this is the linear-time path used for projected
/// and sparse cumulant access.
pub fn cross_cumulant_entry(columns: &[&[f64]], center: bool) -> Result<f64> {
    let t = columns.len();
    if t == 0 {
        return Err(RcaError::InvalidInput("need at least one series".into()));
    }
    if t > MAX_ORDER {
        return Err(RcaError::OrderCap {
            order: t,
            cap: MAX_ORDER,
        });
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(RcaError::InvalidInput("empty series".into()));
    }
    for (index, c) in columns.iter().enumerate() {
        if c.len() != n {
            return Err(RcaError::Alignment {
                index,
                expected: n,
                found: c.len(),
            });
        }
    }
    let owned: Vec<Vec<f64>>;
    let cols: Vec<&[f64]> = if center {
        owned = columns
            .iter()
            .map(|c| {
                let m = c.iter().sum::<f64>() / n as f64;
                c.iter().map(|x| x - m).collect()
            })
            .collect();
        owned.iter().map(|c| c.as_slice()).collect()
    } else {
        columns.to_vec()
    };
    let mut block_moment = vec![0.0; 1 << t];
    for (mask, slot) in block_moment.iter_mut().enumerate().skip(1) {
        let members: Vec<usize> = partition::block_modes(mask as u32).collect();
        let s: f64 = (0..n)
            .map(|r| members.iter().map(|&l| cols[l][r]).product::<f64>())
            .sum();
        *slot = s / n as f64;
    }
    Ok(partitions(t)
        .iter()
        .map(|p| {
            p.moebius_weight()
                * p.blocks()
                    .iter()
                    .map(|&b| block_moment[b as usize])
                    .product::<f64>()
        })
        .sum())
}
