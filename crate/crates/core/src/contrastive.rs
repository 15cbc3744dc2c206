//! Two-view separation for `U = S1 + S2`, `V = A S2 + S3`: recover `A` from
//! fourth-order cross-cumulants, then the cumulants of all three components.

use serde::{Deserialize, Serialize};

use crate::cumulant::{cross_cumulant, ComponentCumulants, CumulantSource, SampleMatrix, SampleViews};
use crate::error::{RcaError, Result};
use crate::tensor::{pinv, pinv_rank, singular_values, DenseTensor, LinearMap, DEFAULT_RANK_TOL};

/// View index of `U` inside a [`CumulantSource`].
pub const VIEW_U: usize = 0;
/// View index of `V` inside a [`CumulantSource`].
pub const VIEW_V: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveOptions {
    /// Relative cutoff for every pseudoinverse.
    pub rank_tol: f64,
    /// `sigma_min < degenerate_tol * sigma_max` of the unfolded cross-cumulant
    /// means the shared component carries no usable non-Gaussian signal.
    pub degenerate_tol: f64,
    /// Use third-order cross-cumulants for `A` (for skewed shared components).
    pub third_order: bool,
    /// Average extracted tensors over mode permutations.
    pub symmetrize: bool,
    /// Known rank of the shared component's support. When set, `A` is only
    /// identified on that subspace: pseudoinverses keep this many singular
    /// values and the full-rank checks on `A` are skipped.
    pub shared_rank: Option<usize>,
}

impl Default for ContrastiveOptions {
    fn default() -> Self {
        ContrastiveOptions {
            rank_tol: DEFAULT_RANK_TOL,
            degenerate_tol: 1e-6,
            third_order: false,
            symmetrize: true,
            shared_rank: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    /// Smallest singular value of the unfolded `kappa(V, U, .., U)`; absent when
    /// `A` was supplied rather than estimated.
    pub sigma4: Option<f64>,
    pub sigma_a: f64,
    pub spectral_a: f64,
    pub radius_bound: f64,
    pub n_samples: usize,
    /// Set when `sigma4` sits below `rank_tol` times the largest singular value.
    pub rank_warning: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastiveExtraction {
    pub a_hat: LinearMap,
    pub s1: ComponentCumulants,
    pub s2: ComponentCumulants,
    pub s3: ComponentCumulants,
    pub diagnostics: ConditioningReport,
}

impl ContrastiveExtraction {
    pub fn component(&self, index: usize) -> Option<&ComponentCumulants> {
        match index {
            1 => Some(&self.s1),
            2 => Some(&self.s2),
            3 => Some(&self.s3),
            _ => None,
        }
    }
}

fn check_pair(source: &dyn CumulantSource) -> Result<(usize, usize)> {
    if source.n_views() != 2 {
        return Err(RcaError::InvalidInput(format!(
            "contrastive model needs exactly 2 views, got {}",
            source.n_views()
        )));
    }
    let (du, dv) = (source.view_dim(VIEW_U), source.view_dim(VIEW_V));
    if dv < du {
        return Err(RcaError::InvalidInput(format!(
            "dim(V) = {dv} is smaller than dim(U) = {du}; A must have full column rank"
        )));
    }
    Ok((du, dv))
}

/// Estimates `A` from samples with the default options and the given `rank_tol`.
pub fn estimate_a(u: &SampleMatrix, v: &SampleMatrix, rank_tol: f64) -> Result<(LinearMap, ConditioningReport)> {
    let source = SampleViews::new(&[u, v])?;
    let opts = ContrastiveOptions {
        rank_tol,
        ..ContrastiveOptions::default()
    };
    estimate_a_from(&source, &opts)
}

/// `A^T = pinv(unfold kappa(V,U,U,U)) unfold kappa(V,U,U,V)`, or the order-3
/// analogue when `opts.third_order` is set.
pub fn estimate_a_from(source: &dyn CumulantSource, opts: &ContrastiveOptions) -> Result<(LinearMap, ConditioningReport)> {
    check_pair(source)?;
    let (base, swapped): (&[usize], &[usize]) = if opts.third_order {
        (&[VIEW_V, VIEW_U, VIEW_U], &[VIEW_V, VIEW_U, VIEW_V])
    } else {
        (&[VIEW_V, VIEW_U, VIEW_U, VIEW_U], &[VIEW_V, VIEW_U, VIEW_U, VIEW_V])
    };
    let m1 = source.cross_cumulant(base)?.unfold()?;
    let m2 = source.cross_cumulant(swapped)?.unfold()?;
    if !m1.iter().chain(m2.iter()).all(|x| x.is_finite()) {
        return Err(RcaError::Numeric("non-finite cross-cumulant".into()));
    }
    let s = singular_values(&m1);
    let smax = s[0];
    let sigma4 = match opts.shared_rank {
        Some(r) => s[r.clamp(1, s.len()) - 1],
        None => *s.last().unwrap(),
    };
    let threshold = opts.degenerate_tol * smax;
    if smax == 0.0 || sigma4 < threshold {
        return Err(RcaError::DegenerateComponent { sigma: sigma4, threshold });
    }
    let m1_pinv = match opts.shared_rank {
        Some(r) => pinv_rank(&m1, r)?,
        None => pinv(&m1, opts.rank_tol)?,
    };
    let a_t = m1_pinv * m2;
    let a = a_t.transpose();
    let sa = singular_values(&a);
    let report = ConditioningReport {
        sigma4: Some(sigma4),
        sigma_a: *sa.last().unwrap(),
        spectral_a: sa[0],
        radius_bound: source.radius_bound(),
        n_samples: source.n_samples(),
        rank_warning: sigma4 < opts.rank_tol * smax,
    };
    Ok((a, report))
}

fn check_map(a: &LinearMap, du: usize, dv: usize, rank_tol: f64, shared_rank: Option<usize>) -> Result<LinearMap> {
    if a.nrows() != dv || a.ncols() != du {
        return Err(RcaError::InvalidInput(format!(
            "A must be {dv}x{du}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let s = singular_values(a);
    let threshold = rank_tol * s[0];
    let smin = match shared_rank {
        Some(r) => s[r.clamp(1, s.len()) - 1],
        None => *s.last().unwrap(),
    };
    if s[0] == 0.0 || smin <= threshold {
        return Err(RcaError::DegenerateMap { sigma: smin, threshold });
    }
    match shared_rank {
        Some(r) => pinv_rank(a, r),
        None => pinv(a, rank_tol),
    }
}

fn report_for(a: &LinearMap, source: &dyn CumulantSource) -> ConditioningReport {
    let s = singular_values(a);
    ConditioningReport {
        sigma4: None,
        sigma_a: *s.last().unwrap(),
        spectral_a: s[0],
        radius_bound: source.radius_bound(),
        n_samples: source.n_samples(),
        rank_warning: false,
    }
}

/// Cumulants of orders `2..=t_max` of all three components from samples.
pub fn extract_cumulants(u: &SampleMatrix, v: &SampleMatrix, a: &LinearMap, t_max: usize) -> Result<ContrastiveExtraction> {
    let source = SampleViews::new(&[u, v])?;
    extract_cumulants_from(&source, a, t_max, &ContrastiveOptions::default())
}

/// Cross-cumulant extraction:
/// `kappa(S2) = kappa(U, .., U, A^+ V)`, `kappa(S1) = kappa(U) - kappa(S2)`,
/// `kappa(S3) = kappa(V) - kappa(A U, V, .., V)`.
pub fn extract_cumulants_from(
    source: &dyn CumulantSource,
    a: &LinearMap,
    t_max: usize,
    opts: &ContrastiveOptions,
) -> Result<ContrastiveExtraction> {
    let (du, dv) = check_pair(source)?;
    check_t_max(t_max)?;
    let a_pinv = check_map(a, du, dv, opts.rank_tol, opts.shared_rank)?;
    let mut s1 = ComponentCumulants::new(source.view_mean(VIEW_U));
    let mut s2 = ComponentCumulants::new(vec![0.0; du]);
    let mut s3 = ComponentCumulants::new(source.view_mean(VIEW_V));
    let ident_u = LinearMap::identity(du, du);
    let ident_v = LinearMap::identity(dv, dv);
    for t in 2..=t_max {
        let mut views = vec![VIEW_U; t];
        views[t - 1] = VIEW_V;
        let mut maps = vec![ident_u.clone(); t];
        maps[t - 1] = a_pinv.transpose();
        let mut k2 = source.cross_cumulant(&views)?.multilinear_apply(&maps)?;
        if opts.symmetrize {
            k2 = k2.symmetrize()?;
        }
        let k1 = source.cross_cumulant(&vec![VIEW_U; t])?.sub(&k2)?;

        let mut views = vec![VIEW_V; t];
        views[0] = VIEW_U;
        let mut maps = vec![ident_v.clone(); t];
        maps[0] = a.transpose();
        let mut shared_in_v = source.cross_cumulant(&views)?.multilinear_apply(&maps)?;
        if opts.symmetrize {
            shared_in_v = shared_in_v.symmetrize()?;
        }
        let k3 = source.cross_cumulant(&vec![VIEW_V; t])?.sub(&shared_in_v)?;

        s1.insert(t, k1);
        s2.insert(t, k2);
        s3.insert(t, k3);
    }
    let out = ContrastiveExtraction {
        a_hat: a.clone(),
        s1,
        s2,
        s3,
        diagnostics: report_for(a, source),
    };
    if !(out.s1.is_finite() && out.s2.is_finite() && out.s3.is_finite()) {
        return Err(RcaError::Numeric("non-finite extracted cumulant".into()));
    }
    Ok(out)
}

fn check_t_max(t_max: usize) -> Result<()> {
    if !(2..=crate::cumulant::MAX_ORDER).contains(&t_max) {
        return Err(RcaError::InvalidOrder {
            order: t_max,
            reason: "t_max must lie in 2..=6",
        });
    }
    Ok(())
}

/// Estimates `A` and extracts cumulants in one call.
pub fn run_contrastive(
    u: &SampleMatrix,
    v: &SampleMatrix,
    t_max: usize,
    opts: &ContrastiveOptions,
) -> Result<ContrastiveExtraction> {
    let source = SampleViews::new(&[u, v])?;
    let (a, report) = estimate_a_from(&source, opts)?;
    let mut out = extract_cumulants_from(&source, &a, t_max, opts)?;
    out.diagnostics = report;
    Ok(out)
}

/// Sum-identity extraction: with `W = A^+ V`,
/// `kappa_t(S2) = [kappa_t(U + W) - kappa_t(U) - kappa_t(W)] / (2^t - 2)`
/// and the analogous expression with `A U + V` for `S3`.
pub fn extract_cumulants_sum_identity(
    u: &SampleMatrix,
    v: &SampleMatrix,
    a: &LinearMap,
    t_max: usize,
) -> Result<ContrastiveExtraction> {
    let source = SampleViews::new(&[u, v])?;
    let (du, dv) = check_pair(&source)?;
    check_t_max(t_max)?;
    let a_pinv = check_map(a, du, dv, DEFAULT_RANK_TOL, None)?;
    let uc = source.view(VIEW_U);
    let vc = source.view(VIEW_V);
    let w = vc.transform(&a_pinv)?;
    let uw = uc.add(&w)?;
    let au = uc.transform(a)?;
    let auv = au.add(vc)?;

    let auto = |x: &SampleMatrix, t: usize| -> Result<DenseTensor> {
        Ok(cross_cumulant(&vec![x; t], false)?.tensor)
    };
    let mut s1 = ComponentCumulants::new(source.view_mean(VIEW_U));
    let mut s2 = ComponentCumulants::new(vec![0.0; du]);
    let mut s3 = ComponentCumulants::new(source.view_mean(VIEW_V));
    for t in 2..=t_max {
        let denom = ((1u64 << t) - 2) as f64;
        let ku = auto(uc, t)?;
        let kv = auto(vc, t)?;
        let k2 = auto(&uw, t)?.sub(&ku)?.sub(&auto(&w, t)?)?.scale(1.0 / denom);
        let shared_in_v = auto(&auv, t)?.sub(&auto(&au, t)?)?.sub(&kv)?.scale(1.0 / denom);
        s1.insert(t, ku.sub(&k2)?);
        s3.insert(t, kv.sub(&shared_in_v)?);
        s2.insert(t, k2);
    }
    Ok(ContrastiveExtraction {
        a_hat: a.clone(),
        s1,
        s2,
        s3,
        diagnostics: report_for(a, &source),
    })
}
