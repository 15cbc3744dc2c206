//! Pairwise Ising models on a periodic grid and composite-likelihood fitting.
//!
//! The composite log-likelihood gradient for edge `(i, j)` is
//! `E[2 s_i s_j / (1 + exp(2 s_i h_i)) + 2 s_i s_j / (1 + exp(2 s_j h_j))]`
//! with local fields `h_i = sum_k J_ik s_k`. Its first-order expansion in the
//! fields, `E[2 s_i s_j - s_i^2 s_j h_i - s_i s_j^2 h_j]`, needs only second
//! and fourth moments and is the gradient of
//! `sum_i E[s_i h_i - s_i^2 h_i^2 / 2]`.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{approx_gd, ApproxGdConfig, GdTrace};
use crate::cumulant::{cross_cumulant_entry, partitions, ComponentCumulants, SampleMatrix};
use crate::error::{RcaError, Result};
use crate::tensor::{pinv, pinv_rank, LinearMap, DEFAULT_RANK_TOL};

/// Largest model handled by exhaustive enumeration.
pub const MAX_ENUMERATED_SPINS: usize = 20;

/// Couplings on a fixed edge set. Grid models are 4-neighbour tori.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIsing", into = "RawIsing")]
pub struct IsingSpec {
    n_spins: usize,
    side: Option<usize>,
    edges: Vec<(usize, usize)>,
    couplings: Vec<f64>,
    /// `(neighbour, edge index)` per spin.
    neighbors: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct RawIsing {
    n_spins: usize,
    side: Option<usize>,
    edges: Vec<(usize, usize)>,
    couplings: Vec<f64>,
}

impl TryFrom<RawIsing> for IsingSpec {
    type Error = RcaError;

    fn try_from(raw: RawIsing) -> Result<Self> {
        let spec = IsingSpec::from_edges(raw.n_spins, raw.edges, raw.couplings)?;
        match raw.side {
            Some(side) if spec.edges != torus_edges(side) => Err(RcaError::InvalidInput(format!(
                "edge list does not match the {side}x{side} torus"
            ))),
            side => Ok(IsingSpec { side, ..spec }),
        }
    }
}

impl From<IsingSpec> for RawIsing {
    fn from(s: IsingSpec) -> Self {
        RawIsing {
            n_spins: s.n_spins,
            side: s.side,
            edges: s.edges,
            couplings: s.couplings,
        }
    }
}

/// Edges of the `side x side` torus: for each vertex in row-major order, its
/// right neighbour and then its lower neighbour.
pub fn torus_edges(side: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * side * side);
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            edges.push((v, r * side + (c + 1) % side));
            edges.push((v, ((r + 1) % side) * side + c));
        }
    }
    edges
}

impl IsingSpec {
    /// Periodic `side x side` grid; `couplings` follows [`torus_edges`].
    pub fn torus(side: usize, couplings: Vec<f64>) -> Result<Self> {
        if side < 3 {
            return Err(RcaError::InvalidInput(format!(
                "a periodic grid needs side >= 3 to avoid repeated edges, got {side}"
            )));
        }
        let mut spec = IsingSpec::from_edges(side * side, torus_edges(side), couplings)?;
        spec.side = Some(side);
        Ok(spec)
    }

    /// Torus with couplings drawn from `Unif[-scale, scale]`.
    pub fn random_torus<R: Rng>(side: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let couplings = (0..2 * side * side).map(|_| rng.random_range(-scale..=scale)).collect();
        IsingSpec::torus(side, couplings)
    }

    pub fn from_edges(n_spins: usize, edges: Vec<(usize, usize)>, couplings: Vec<f64>) -> Result<Self> {
        if n_spins == 0 {
            return Err(RcaError::InvalidInput("an Ising model needs at least one spin".into()));
        }
        if couplings.len() != edges.len() {
            return Err(RcaError::InvalidInput(format!(
                "{} edges but {} couplings",
                edges.len(),
                couplings.len()
            )));
        }
        if let Some(j) = couplings.iter().find(|j| !j.is_finite()) {
            return Err(RcaError::InvalidInput(format!("non-finite coupling {j}")));
        }
        let mut neighbors = vec![Vec::new(); n_spins];
        let mut seen = std::collections::HashSet::new();
        for (e, &(i, j)) in edges.iter().enumerate() {
            if i >= n_spins || j >= n_spins || i == j {
                return Err(RcaError::InvalidInput(format!("invalid edge ({i}, {j})")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(RcaError::InvalidInput(format!("edge ({i}, {j}) listed twice")));
            }
            neighbors[i].push((j, e));
            neighbors[j].push((i, e));
        }
        Ok(IsingSpec {
            n_spins,
            side: None,
            edges,
            couplings,
            neighbors,
        })
    }

    /// Same graph with new couplings.
    pub fn with_couplings(&self, couplings: Vec<f64>) -> Result<Self> {
        let mut spec = IsingSpec::from_edges(self.n_spins, self.edges.clone(), couplings)?;
        spec.side = self.side;
        Ok(spec)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn side(&self) -> Option<usize> {
        self.side
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.neighbors[i]
    }

    fn check_couplings(&self, couplings: &[f64]) -> Result<()> {
        if couplings.len() != self.n_edges() {
            return Err(RcaError::Shape {
                mode: 0,
                expected: self.n_edges(),
                found: couplings.len(),
            });
        }
        Ok(())
    }

    /// `h_i = sum_k J_ik s_k`.
    pub fn local_field(&self, couplings: &[f64], s: &[f64], i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(k, e)| couplings[e] * s[k]).sum()
    }

    /// `sum_(i,j) J_ij s_i s_j`.
    pub fn interaction(&self, s: &[f64]) -> f64 {
        self.edges
            .iter()
            .zip(&self.couplings)
            .map(|(&(i, j), jij)| jij * s[i] * s[j])
            .sum()
    }

    /// Exact distribution by enumerating all `2^n` states.
    pub fn enumerate(&self) -> Result<ExactIsing> {
        if self.n_spins > MAX_ENUMERATED_SPINS {
            return Err(RcaError::InvalidInput(format!(
                "{} spins exceed the enumeration cap of {MAX_ENUMERATED_SPINS}",
                self.n_spins
            )));
        }
        let n_states = 1usize << self.n_spins;
        let states: Vec<Vec<f64>> = (0..n_states).map(|mask| spins_of(mask, self.n_spins)).collect();
        let log_w: Vec<f64> = states.iter().map(|s| self.interaction(s)).collect();
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        Ok(ExactIsing {
            states,
            probs: w.iter().map(|x| x / z).collect(),
        })
    }

    /// Draws `n` states: exact sampling for grids of side at most 3 (or up to
    /// 9 spins without a grid), Gibbs sampling otherwise.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<SampleMatrix> {
        let small = match self.side {
            Some(side) => side <= 3,
            None => self.n_spins <= 9,
        };
        if small {
            self.enumerate()?.sample(n, rng)
        } else {
            self.gibbs(n, 10 * self.n_spins, self.n_spins, rng)
        }
    }

    /// Single-site heat-bath chain started from a uniform state, with the given
    /// burn-in and thinning counted in full sweeps.
    pub fn gibbs<R: Rng>(&self, n: usize, burn_in: usize, thin: usize, rng: &mut R) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(RcaError::InvalidInput("need at least one sample".into()));
        }
        let mut s: Vec<f64> = (0..self.n_spins)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let sweep = |s: &mut Vec<f64>, rng: &mut R| {
            for i in 0..self.n_spins {
                let h = self.local_field(&self.couplings, s, i);
                let p_up = 1.0 / (1.0 + (-2.0 * h).exp());
                s[i] = if rng.random::<f64>() < p_up { 1.0 } else { -1.0 };
            }
        };
        for _ in 0..burn_in {
            sweep(&mut s, rng);
        }
        let mut data = Vec::with_capacity(n * self.n_spins);
        for _ in 0..n {
            for _ in 0..thin.max(1) {
                sweep(&mut s, rng);
            }
            data.extend_from_slice(&s);
        }
        SampleMatrix::new(n, self.n_spins, data)
    }
}

fn spins_of(mask: usize, n: usize) -> Vec<f64> {
    (0..n).map(|k| if mask >> k & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

/// Enumerated state probabilities of a small model.
#[derive(Debug, Clone)]
pub struct ExactIsing {
    states: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl ExactIsing {
    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Exact `E[prod_k s_{idx_k}]`.
    pub fn moment(&self, idx: &[usize]) -> f64 {
        self.states
            .iter()
            .zip(&self.probs)
            .map(|(s, p)| p * idx.iter().map(|&i| s[i]).product::<f64>())
            .sum()
    }

    /// Inverse-CDF sampling over the enumerated states.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(RcaError::InvalidInput("need at least one sample".into()));
        }
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let d = self.states[0].len();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let x = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
            data.extend_from_slice(&self.states[k]);
        }
        SampleMatrix::new(n, d, data)
    }

    /// Exact composite log-likelihood gradient under this distribution.
    pub fn composite_gradient(&self, spec: &IsingSpec, couplings: &[f64]) -> Result<Vec<f64>> {
        weighted_composite(spec, couplings, self.states.iter().map(|s| s.as_slice()).zip(self.probs.iter().copied()))
            .map(|(g, _)| g)
    }

    pub fn composite_log_likelihood(&self, spec: &IsingSpec, couplings: &[f64]) -> Result<f64> {
        weighted_composite(spec, couplings, self.states.iter().map(|s| s.as_slice()).zip(self.probs.iter().copied()))
            .map(|(_, l)| l)
    }
}

/// Gradient and value of the composite log-likelihood over weighted states.
fn weighted_composite<'a>(
    spec: &IsingSpec,
    couplings: &[f64],
    states: impl Iterator<Item = (&'a [f64], f64)>,
) -> Result<(Vec<f64>, f64)> {
    spec.check_couplings(couplings)?;
    let mut grad = vec![0.0; spec.n_edges()];
    let mut ll = 0.0;
    let mut tail = vec![0.0; spec.n_spins];
    for (s, w) in states {
        if s.len() != spec.n_spins {
            return Err(RcaError::Shape {
                mode: 1,
                expected: spec.n_spins,
                found: s.len(),
            });
        }
        for i in 0..spec.n_spins {
            let m = 2.0 * s[i] * spec.local_field(couplings, s, i);
            // log sigmoid(m) and 1 - sigmoid(m), computed stably
            ll -= w * if m > 0.0 { (-m).exp().ln_1p() } else { m.exp().ln_1p() - m };
            tail[i] = 1.0 / (1.0 + m.exp());
        }
        for (g, &(i, j)) in grad.iter_mut().zip(&spec.edges) {
            *g += w * 2.0 * s[i] * s[j] * (tail[i] + tail[j]);
        }
    }
    Ok((grad, ll))
}

/// Exact composite log-likelihood gradient averaged over observed states.
pub fn exact_composite_gradient(spec: &IsingSpec, couplings: &[f64], samples: &SampleMatrix) -> Result<Vec<f64>> {
    let w = 1.0 / samples.n() as f64;
    weighted_composite(spec, couplings, samples.rows().map(|r| (r, w))).map(|(g, _)| g)
}

/// Products of spins needed by the expanded gradient: `E[s_i s_j]` and
/// fourth-order products with repeated indices.
pub trait SpinMoments {
    fn n_spins(&self) -> usize;
    fn moment(&self, idx: &[usize]) -> Result<f64>;
}

impl SpinMoments for ExactIsing {
    fn n_spins(&self) -> usize {
        self.states[0].len()
    }

    fn moment(&self, idx: &[usize]) -> Result<f64> {
        check_indices(idx, self.n_spins())?;
        Ok(ExactIsing::moment(self, idx))
    }
}

/// Plain empirical moments.
impl SpinMoments for SampleMatrix {
    fn n_spins(&self) -> usize {
        self.d()
    }

    fn moment(&self, idx: &[usize]) -> Result<f64> {
        check_indices(idx, self.d())?;
        Ok(self.rows().map(|r| idx.iter().map(|&i| r[i]).product::<f64>()).sum::<f64>() / self.n() as f64)
    }
}

/// Moments rebuilt from full cumulant tensors of a component.
impl SpinMoments for ComponentCumulants {
    fn n_spins(&self) -> usize {
        self.dim()
    }

    fn moment(&self, idx: &[usize]) -> Result<f64> {
        check_indices(idx, self.dim())?;
        moment_from_cumulants(idx, |block| {
            if block.len() == 1 {
                return Ok(self.mean[block[0]]);
            }
            Ok(self.require(block.len())?.get(block))
        })
    }
}

fn check_indices(idx: &[usize], d: usize) -> Result<()> {
    if idx.is_empty() || idx.len() > crate::cumulant::MAX_ORDER {
        return Err(RcaError::InvalidInput(format!("unsupported moment order {}", idx.len())));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= d) {
        return Err(RcaError::InvalidInput(format!("spin index {bad} outside 0..{d}")));
    }
    Ok(())
}

/// `E[prod x_{idx}] = sum over partitions of the product of block cumulants`.
fn moment_from_cumulants(idx: &[usize], mut kappa: impl FnMut(&[usize]) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for p in partitions(idx.len()) {
        let mut term = 1.0;
        for &mask in p.blocks() {
            let block: Vec<usize> = (0..idx.len()).filter(|b| mask >> b & 1 == 1).map(|b| idx[b]).collect();
            term *= kappa(&block)?;
        }
        total += term;
    }
    Ok(total)
}

/// Entry-level moments of the target component from aligned samples of
/// `U = S1 + S2` and `W = A^+ V`, using
/// `kappa(S1)_idx = kappa(U, .., U)_idx - kappa(U, .., U, W)_idx` and the
/// convention that the shared component has mean zero.
pub struct ContrastiveSpinMoments {
    u_cols: Vec<Vec<f64>>,
    w_cols: Vec<Vec<f64>>,
    cache: RefCell<HashMap<Vec<usize>, f64>>,
}

impl ContrastiveSpinMoments {
    pub fn new(u: &SampleMatrix, w: &SampleMatrix) -> Result<Self> {
        if u.n() != w.n() {
            return Err(RcaError::Alignment {
                index: 1,
                expected: u.n(),
                found: w.n(),
            });
        }
        if u.d() != w.d() {
            return Err(RcaError::Shape {
                mode: 1,
                expected: u.d(),
                found: w.d(),
            });
        }
        Ok(ContrastiveSpinMoments {
            u_cols: (0..u.d()).map(|j| u.column(j)).collect(),
            w_cols: (0..w.d()).map(|j| w.column(j)).collect(),
            cache: RefCell::new(HashMap::new()),
        })
    }

    fn target_cumulant(&self, block: &[usize]) -> Result<f64> {
        if let Some(&v) = self.cache.borrow().get(block) {
            return Ok(v);
        }
        let t = block.len();
        let value = if t == 1 {
            let c = &self.u_cols[block[0]];
            c.iter().sum::<f64>() / c.len() as f64
        } else {
            let mut cols: Vec<&[f64]> = block.iter().map(|&i| self.u_cols[i].as_slice()).collect();
            let whole = cross_cumulant_entry(&cols, true)?;
            cols[t - 1] = &self.w_cols[block[t - 1]];
            whole - cross_cumulant_entry(&cols, true)?
        };
        self.cache.borrow_mut().insert(block.to_vec(), value);
        Ok(value)
    }
}

impl SpinMoments for ContrastiveSpinMoments {
    fn n_spins(&self) -> usize {
        self.u_cols.len()
    }

    fn moment(&self, idx: &[usize]) -> Result<f64> {
        check_indices(idx, self.n_spins())?;
        moment_from_cumulants(idx, |block| self.target_cumulant(block))
    }
}

/// The expanded gradient is affine in the couplings: `b - M J`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSystem {
    pub b: Vec<f64>,
    pub m: LinearMap,
}

impl TaylorSystem {
    /// `b_e = 2 E[s_i s_j]`; row `e` of `M` collects `E[s_i^2 s_j s_k]` at edge
    /// `(i, k)` and `E[s_i s_j^2 s_k]` at edge `(j, k)`.
    pub fn from_moments(spec: &IsingSpec, moments: &dyn SpinMoments) -> Result<Self> {
        if moments.n_spins() != spec.n_spins {
            return Err(RcaError::Shape {
                mode: 1,
                expected: spec.n_spins,
                found: moments.n_spins(),
            });
        }
        let p = spec.n_edges();
        let mut b = vec![0.0; p];
        let mut m = LinearMap::zeros(p, p);
        for (e, &(i, j)) in spec.edges.iter().enumerate() {
            b[e] = 2.0 * moments.moment(&[i, j])?;
            for &(k, f) in &spec.neighbors[i] {
                m[(e, f)] += moments.moment(&[i, i, j, k])?;
            }
            for &(k, f) in &spec.neighbors[j] {
                m[(e, f)] += moments.moment(&[i, j, j, k])?;
            }
        }
        Ok(TaylorSystem { b, m })
    }

    pub fn gradient(&self, couplings: &[f64]) -> Vec<f64> {
        let mj = &self.m * nalgebra::DVector::from_column_slice(couplings);
        self.b.iter().zip(mj.iter()).map(|(b, x)| b - x).collect()
    }
}

/// Expanded composite-likelihood gradient per edge at `couplings`.
pub fn taylor_gradient(spec: &IsingSpec, moments: &dyn SpinMoments, couplings: &[f64]) -> Result<Vec<f64>> {
    spec.check_couplings(couplings)?;
    Ok(TaylorSystem::from_moments(spec, moments)?.gradient(couplings))
}

/// `sum_i E[s_i h_i - s_i^2 h_i^2 / 2]`, the objective whose gradient is the
/// expanded one.
pub fn truncated_objective(spec: &IsingSpec, moments: &dyn SpinMoments, couplings: &[f64]) -> Result<f64> {
    spec.check_couplings(couplings)?;
    let mut total = 0.0;
    for i in 0..spec.n_spins {
        let nb = &spec.neighbors[i];
        for &(k, e) in nb {
            total += couplings[e] * moments.moment(&[i, k])?;
        }
        for &(k, e) in nb {
            for &(l, f) in nb {
                total -= 0.5 * couplings[e] * couplings[f] * moments.moment(&[i, i, k, l])?;
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingSgdConfig {
    pub step_size: f64,
    pub batch: usize,
    pub max_iters: usize,
    pub record_path: bool,
}

impl Default for IsingSgdConfig {
    fn default() -> Self {
        IsingSgdConfig {
            step_size: 0.05,
            batch: 100,
            max_iters: 500,
            record_path: false,
        }
    }
}

/// Consecutive row blocks of `batch` rows; a short tail is dropped unless it
/// is the only block.
pub fn batch_indices(n: usize, batch: usize) -> Vec<Vec<usize>> {
    let batch = batch.max(1);
    if n <= batch {
        return vec![(0..n).collect()];
    }
    (0..n / batch).map(|b| (b * batch..(b + 1) * batch).collect()).collect()
}

fn ascend(
    spec0: &IsingSpec,
    config: &IsingSgdConfig,
    mut grad: impl FnMut(&[f64], usize) -> Result<Vec<f64>>,
) -> Result<(IsingSpec, GdTrace)> {
    let gd = ApproxGdConfig {
        step_size: Some(config.step_size),
        max_iters: config.max_iters,
        grad_tol: 0.0,
        record_path: config.record_path,
        ..ApproxGdConfig::default()
    };
    let (j, trace) = approx_gd(
        |theta, it| Ok(grad(theta, it)?.into_iter().map(|g| -g).collect()),
        spec0.couplings(),
        &gd,
    )?;
    Ok((spec0.with_couplings(j)?, trace))
}

/// SGD ascent with the expanded gradient, cycling through per-batch systems.
pub fn fit_taylor(spec0: &IsingSpec, systems: &[TaylorSystem], config: &IsingSgdConfig) -> Result<(IsingSpec, GdTrace)> {
    if systems.is_empty() {
        return Err(RcaError::InvalidInput("no batches".into()));
    }
    ascend(spec0, config, |j, it| Ok(systems[it % systems.len()].gradient(j)))
}

/// SGD ascent with the exact composite gradient on batches of true states.
pub fn fit_composite(spec0: &IsingSpec, samples: &SampleMatrix, config: &IsingSgdConfig) -> Result<(IsingSpec, GdTrace)> {
    let batches: Vec<SampleMatrix> = batch_indices(samples.n(), config.batch)
        .iter()
        .map(|idx| samples.select_rows(idx))
        .collect();
    ascend(spec0, config, |j, it| exact_composite_gradient(spec0, j, &batches[it % batches.len()]))
}

/// Expanded-gradient SGD on the raw moments of `x`, ignoring any perturbation.
pub fn fit_naive(spec0: &IsingSpec, x: &SampleMatrix, config: &IsingSgdConfig) -> Result<(IsingSpec, GdTrace)> {
    let systems = batch_indices(x.n(), config.batch)
        .iter()
        .map(|idx| TaylorSystem::from_moments(spec0, &x.select_rows(idx)))
        .collect::<Result<Vec<_>>>()?;
    fit_taylor(spec0, &systems, config)
}

/// Expanded-gradient SGD where every batch's moments of the target component
/// come from `U` and `A^+ V`. With `shared_rank` set, `A^+` keeps only that
/// many singular values.
pub fn contrastive_ising(
    u: &SampleMatrix,
    v: &SampleMatrix,
    a: &LinearMap,
    spec0: &IsingSpec,
    config: &IsingSgdConfig,
    shared_rank: Option<usize>,
) -> Result<(IsingSpec, GdTrace)> {
    if u.n() != v.n() {
        return Err(RcaError::Alignment {
            index: 1,
            expected: u.n(),
            found: v.n(),
        });
    }
    let a_pinv = match shared_rank {
        Some(r) => pinv_rank(a, r)?,
        None => pinv(a, DEFAULT_RANK_TOL)?,
    };
    let w = v.transform(&a_pinv)?;
    let systems = batch_indices(u.n(), config.batch)
        .iter()
        .map(|idx| {
            let moments = ContrastiveSpinMoments::new(&u.select_rows(idx), &w.select_rows(idx))?;
            TaylorSystem::from_moments(spec0, &moments)
        })
        .collect::<Result<Vec<_>>>()?;
    fit_taylor(spec0, &systems, config)
}
