use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::partition::{partition_sum, partitions, MAX_ORDER};
use super::{cross_cumulant, SampleMatrix};
use crate::error::{RcaError, Result};
use crate::tensor::{DenseTensor, LinearMap};

fn check_consecutive(tensors: &[DenseTensor], what: &str) -> Result<usize> {
    let first = tensors
        .first()
        .ok_or_else(|| RcaError::InvalidInput(format!("no {what} given")))?;
    if tensors.len() > MAX_ORDER {
        return Err(RcaError::OrderCap {
            order: tensors.len(),
            cap: MAX_ORDER,
        });
    }
    let d = first.dims()[0];
    for (k, m) in tensors.iter().enumerate() {
        if m.order() != k + 1 {
            return Err(RcaError::InvalidInput(format!(
                "{what} must cover consecutive orders 1..t; position {} holds order {}",
                k + 1,
                m.order()
            )));
        }
        if m.dims().iter().any(|&x| x != d) {
            return Err(RcaError::InvalidInput(format!(
                "{what} of order {} is not cubical with side {d}",
                k + 1
            )));
        }
    }
    Ok(d)
}

fn convert(tensors: &[DenseTensor], moebius: bool) -> Vec<DenseTensor> {
    (1..=tensors.len())
        .map(|t| {
            let dims = vec![tensors[0].dims()[0]; t];
            partition_sum(
                &dims,
                |mask| &tensors[mask.count_ones() as usize - 1],
                |p| if moebius { p.moebius_weight() } else { 1.0 },
            )
        })
        .collect()
}

/// Converts the moment tensors `E[X^{⊗1}], ..., E[X^{⊗t}]` of one variable into
/// its cumulants of orders `1..t`.
pub fn moments_to_cumulants(moments: &[DenseTensor]) -> Result<Vec<DenseTensor>> {
    check_consecutive(moments, "moments")?;
    Ok(convert(moments, true))
}

/// Inverse of [`moments_to_cumulants`]: `E[X^{⊗t}] = sum over partitions of
/// products of block cumulants`.
pub fn cumulants_to_moments(cumulants: &[DenseTensor]) -> Result<Vec<DenseTensor>> {
    check_consecutive(cumulants, "cumulants")?;
    Ok(convert(cumulants, false))
}

/// `(1/n) sum_i x_i (theta^T x_i)^power`, in one pass over the samples.
pub fn projected_moment(x: &SampleMatrix, theta: &[f64], power: usize) -> Result<Vec<f64>> {
    if theta.len() != x.d() {
        return Err(RcaError::Shape {
            mode: 0,
            expected: x.d(),
            found: theta.len(),
        });
    }
    let mut out = vec![0.0; x.d()];
    for r in x.rows() {
        let p: f64 = r.iter().zip(theta).map(|(a, b)| a * b).sum();
        let w = p.powi(power as i32);
        for (o, v) in out.iter_mut().zip(r) {
            *o += w * v;
        }
    }
    let inv = 1.0 / x.n() as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

/// Mean and cumulant tensors of one latent component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCumulants {
    pub mean: Vec<f64>,
    pub cumulants: BTreeMap<usize, DenseTensor>,
}

impl ComponentCumulants {
    pub fn new(mean: Vec<f64>) -> Self {
        ComponentCumulants {
            mean,
            cumulants: BTreeMap::new(),
        }
    }

    pub fn zero(d: usize, orders: impl IntoIterator<Item = usize>) -> Self {
        let mut c = ComponentCumulants::new(vec![0.0; d]);
        for t in orders {
            c.cumulants.insert(t, DenseTensor::zeros(&vec![d; t]));
        }
        c
    }

    /// Plug-in cumulants of orders `2..=t_max` of the rows of `x`.
    pub fn from_samples(x: &SampleMatrix, t_max: usize) -> Result<Self> {
        let c = x.centered();
        let mut out = ComponentCumulants::new(x.mean());
        for t in 2..=t_max {
            let inputs = vec![&c; t];
            out.cumulants.insert(t, cross_cumulant(&inputs, false)?.tensor);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn insert(&mut self, order: usize, tensor: DenseTensor) {
        self.cumulants.insert(order, tensor);
    }

    pub fn get(&self, order: usize) -> Option<&DenseTensor> {
        self.cumulants.get(&order)
    }

    pub fn require(&self, order: usize) -> Result<&DenseTensor> {
        self.get(order)
            .ok_or_else(|| RcaError::InvalidInput(format!("cumulant of order {order} not available")))
    }

    pub fn max_order(&self) -> usize {
        self.cumulants.keys().next_back().copied().unwrap_or(1)
    }

    pub fn covariance(&self) -> Result<LinearMap> {
        self.require(2)?.to_matrix()
    }

    /// `E[X X^T] = kappa_2 + mean mean^T`.
    pub fn second_moment(&self) -> Result<LinearMap> {
        let m = nalgebra::DVector::from_column_slice(&self.mean);
        Ok(self.covariance()? + &m * m.transpose())
    }

    /// Raw moment tensor `E[X^{⊗t}]` rebuilt from the stored cumulants.
    pub fn raw_moment(&self, order: usize) -> Result<DenseTensor> {
        if order == 0 {
            return Err(RcaError::InvalidInput("moment order must be >= 1".into()));
        }
        let mut list = vec![DenseTensor::from_vector(&self.mean)];
        for t in 2..=order {
            list.push(self.require(t)?.clone());
        }
        Ok(cumulants_to_moments(&list)?.pop().unwrap())
    }

    /// Every stored tensor averaged over mode permutations.
    pub fn symmetrized(&self) -> Result<Self> {
        let mut out = ComponentCumulants::new(self.mean.clone());
        for (&t, k) in &self.cumulants {
            out.cumulants.insert(t, k.symmetrize()?);
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|x| x.is_finite()) && self.cumulants.values().all(|k| k.is_finite())
    }
}

/// `E[S (theta^T S)^power]` rebuilt from the cumulants of `S`.
///
/// Sums over partitions of `{0, ..., power}` where element 0 carries the free
/// index: its block contributes `kappa_s(., theta, ..., theta)` and every other
/// block the scalar `kappa_s(theta, ..., theta)`. Cost is linear in `d^s`.
pub fn debiased_projected_moment(
    component: &ComponentCumulants,
    theta: &[f64],
    power: usize,
) -> Result<Vec<f64>> {
    let d = component.dim();
    if theta.len() != d {
        return Err(RcaError::Shape {
            mode: 0,
            expected: d,
            found: theta.len(),
        });
    }
    if power + 1 > MAX_ORDER {
        return Err(RcaError::OrderCap {
            order: power + 1,
            cap: MAX_ORDER,
        });
    }
    // vectors[s]: kappa_s contracted on its trailing s-1 modes; scalars[s]: fully contracted
    let mut vectors = vec![component.mean.clone()];
    let mut scalars = vec![dot(&component.mean, theta)];
    for s in 2..=power + 1 {
        let k = component.require(s)?;
        let v = k.contract_trailing(1, theta)?;
        scalars.push(dot(&v, theta));
        vectors.push(v);
    }
    let mut out = vec![0.0; d];
    for p in partitions(power + 1) {
        let mut coef = 1.0;
        let mut free = None;
        for &b in p.blocks() {
            let size = b.count_ones() as usize;
            if b & 1 != 0 {
                free = Some(size);
            } else {
                coef *= scalars[size - 1];
            }
        }
        if coef == 0.0 {
            continue;
        }
        let v = &vectors[free.expect("element 0 lies in some block") - 1];
        for (o, x) in out.iter_mut().zip(v) {
            *o += coef * x;
        }
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unbiased k-statistic of order `t <= 3` of a scalar sample.
pub fn k_statistic(x: &[f64], t: usize) -> Result<f64> {
    let n = x.len();
    if !(1..=3).contains(&t) {
        return Err(RcaError::InvalidOrder {
            order: t,
            reason: "k-statistics are provided for orders 1 to 3",
        });
    }
    if n < t.max(2) {
        return Err(RcaError::InvalidInput(format!("k-statistic of order {t} needs more than {n} samples")));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let central = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / nf;
    Ok(match t {
        1 => mean,
        2 => nf / (nf - 1.0) * central(2),
        _ => nf * nf / ((nf - 1.0) * (nf - 2.0)) * central(3),
    })
}
