use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{check_distinguishable, is_proper_subset, Distinguishability, SetSystem};
use crate::cumulant::{ComponentCumulants, CumulantSource};
use crate::error::{RcaError, Result};
use crate::tensor::{pinv, singular_values, DenseTensor, LinearMap, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralOptions {
    /// Relative threshold for declaring a component absent and for rejecting
    /// rank-deficient unfoldings.
    pub zero_tol: f64,
    pub rank_tol: f64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions {
            zero_tol: 1e-6,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Recovered maps and component cumulants for a set system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneralExtraction {
    pub system: SetSystem,
    pub level: usize,
    /// Distinguishing set per component (views numbered from 1).
    pub certificate: Vec<Vec<usize>>,
    /// Component indices in the order they were processed.
    pub order: Vec<usize>,
    /// `maps[j][i]` maps component `j` into view `i` (numbered from 1);
    /// the smallest view of each component gets the identity.
    pub maps: Vec<BTreeMap<usize, LinearMap>>,
    pub cumulants: Vec<ComponentCumulants>,
    pub zero_components: BTreeSet<usize>,
}

impl GeneralExtraction {
    pub fn map(&self, view: usize, component: usize) -> Option<&LinearMap> {
        self.maps.get(component)?.get(&view)
    }
}

fn certify(system: &SetSystem) -> Result<(usize, Vec<Vec<usize>>)> {
    let level = system.level();
    match check_distinguishable(system, level)? {
        Distinguishability::Certified(cert) => Ok((level, cert)),
        Distinguishability::Failed { subset, .. } => Err(RcaError::Precondition(format!(
            "subset {subset:?} has no distinguishing set"
        ))),
    }
}

fn check_views(source: &dyn CumulantSource, system: &SetSystem) -> Result<usize> {
    if source.n_views() != system.k() {
        return Err(RcaError::InvalidInput(format!(
            "set system has {} views but the data has {}",
            system.k(),
            source.n_views()
        )));
    }
    let d = source.view_dim(0);
    for v in 1..source.n_views() {
        if source.view_dim(v) != d {
            return Err(RcaError::InvalidInput(format!(
                "all views must share one dimension; view {} has {} instead of {d}",
                v + 1,
                source.view_dim(v)
            )));
        }
    }
    Ok(d)
}

/// Distinguishing views padded to `len` by repeating the last one.
fn padded(t: &[usize], len: usize) -> Vec<usize> {
    let mut w = t.to_vec();
    while w.len() < len {
        w.push(*t.last().unwrap());
    }
    w.truncate(len.max(t.len()));
    w
}

/// `kappa(U_{w_1}, .., U_{w_t})` minus the contribution of every processed
/// proper superset `l` of component `j`: `kappa(S_l)(A^{(w_1,l)T}, ..)`.
fn corrected(
    source: &dyn CumulantSource,
    system: &SetSystem,
    j: usize,
    views: &[usize],
    processed: &[usize],
    maps: &[BTreeMap<usize, LinearMap>],
    cumulants: &[Option<DenseTensor>],
) -> Result<(DenseTensor, DenseTensor)> {
    let zero_based: Vec<usize> = views.iter().map(|v| v - 1).collect();
    let raw = source.cross_cumulant(&zero_based)?;
    let mut out = raw.clone();
    for &l in processed {
        if !is_proper_subset(&system.subsets()[j], &system.subsets()[l]) {
            continue;
        }
        let Some(k) = &cumulants[l] else { continue };
        let m: Vec<LinearMap> = views.iter().map(|v| maps[l][v].transpose()).collect();
        out.axpy(-1.0, &k.multilinear_apply(&m)?)?;
    }
    Ok((raw, out))
}

fn inverse_transposes(maps: &BTreeMap<usize, LinearMap>, views: &[usize], rank_tol: f64) -> Result<Vec<LinearMap>> {
    views
        .iter()
        .map(|v| {
            let a = &maps[v];
            let s = singular_values(a);
            let smin = *s.last().unwrap();
            if smin <= rank_tol * s[0] || s[0] == 0.0 {
                return Err(RcaError::DegenerateMap {
                    sigma: smin,
                    threshold: rank_tol * s[0],
                });
            }
            Ok(pinv(a, rank_tol)?.transpose())
        })
        .collect()
}

/// Recovers every map `A^{(i,j)}` and the order-`L+1` component cumulants,
/// processing subsets in the default maximal-first order.
pub fn find_linear(source: &dyn CumulantSource, system: &SetSystem, opts: &GeneralOptions) -> Result<GeneralExtraction> {
    find_linear_in_order(source, system, &system.processing_order(), opts)
}

/// As [`find_linear`] with an explicit processing order, which must place
/// every subset before its proper subsets.
pub fn find_linear_in_order(
    source: &dyn CumulantSource,
    system: &SetSystem,
    order: &[usize],
    opts: &GeneralOptions,
) -> Result<GeneralExtraction> {
    let d = check_views(source, system)?;
    if !system.is_valid_order(order) {
        return Err(RcaError::InvalidInput(format!(
            "processing order {order:?} visits a subset before one of its supersets"
        )));
    }
    let (level, certificate) = certify(system)?;
    let p = system.len();
    let mut maps: Vec<BTreeMap<usize, LinearMap>> = vec![BTreeMap::new(); p];
    let mut top: Vec<Option<DenseTensor>> = vec![None; p];
    let mut zero = BTreeSet::new();
    let mut processed = Vec::with_capacity(p);

    for &j in order {
        let q = &system.subsets()[j];
        let first = q[0];
        let w = padded(&certificate[j], level);
        let mut unfolded = BTreeMap::new();
        let mut base_tensor = None;
        for &i in q {
            let mut views = w.clone();
            views.push(i);
            let (raw, tensor) = corrected(source, system, j, &views, &processed, &maps, &top)?;
            if i == first {
                let m = tensor.unfold()?;
                let m_norm = m.norm();
                if m_norm <= opts.zero_tol * raw.frobenius_norm() {
                    break;
                }
                let s = singular_values(&m);
                let smin = *s.last().unwrap();
                if smin < opts.zero_tol * s[0] {
                    return Err(RcaError::DegenerateComponent {
                        sigma: smin,
                        threshold: opts.zero_tol * s[0],
                    });
                }
                base_tensor = Some(tensor.clone());
            }
            unfolded.insert(i, tensor.unfold()?);
        }
        processed.push(j);
        let Some(base_tensor) = base_tensor else {
            zero.insert(j);
            continue;
        };
        let base_pinv = pinv(&unfolded[&first], opts.rank_tol)?;
        for &i in q {
            let a = if i == first {
                LinearMap::identity(d, d)
            } else {
                (&base_pinv * &unfolded[&i]).transpose()
            };
            maps[j].insert(i, a);
        }
        let mut inv = inverse_transposes(&maps[j], &w, opts.rank_tol)?;
        inv.push(LinearMap::identity(d, d));
        top[j] = Some(base_tensor.multilinear_apply(&inv)?);
    }
    if zero.len() == p {
        return Err(RcaError::DegenerateInput(
            "every component was detected as zero".into(),
        ));
    }
    let cumulants = top
        .into_iter()
        .map(|k| {
            let mut c = ComponentCumulants::new(vec![0.0; d]);
            c.insert(level + 1, k.unwrap_or_else(|| DenseTensor::zeros(&vec![d; level + 1])));
            c
        })
        .collect();
    Ok(GeneralExtraction {
        system: system.clone(),
        level,
        certificate,
        order: order.to_vec(),
        maps,
        cumulants,
        zero_components: zero,
    })
}

/// Order-`t` cumulant of every component given recovered maps. The result is
/// also stored into `extraction.cumulants`.
pub fn compute_cumulants(
    source: &dyn CumulantSource,
    extraction: &mut GeneralExtraction,
    t: usize,
    opts: &GeneralOptions,
) -> Result<Vec<DenseTensor>> {
    let system = extraction.system.clone();
    let d = check_views(source, &system)?;
    if t < extraction.level {
        return Err(RcaError::OrderTooLow {
            order: t,
            level: extraction.level,
        });
    }
    if t > crate::cumulant::MAX_ORDER {
        return Err(RcaError::OrderCap {
            order: t,
            cap: crate::cumulant::MAX_ORDER,
        });
    }
    let p = system.len();
    let mut out: Vec<Option<DenseTensor>> = vec![None; p];
    let mut processed = Vec::with_capacity(p);
    for &j in &extraction.order.clone() {
        processed.push(j);
        if extraction.zero_components.contains(&j) {
            continue;
        }
        let w = padded(&extraction.certificate[j], t);
        let (_, tensor) = corrected(source, &system, j, &w, &processed[..processed.len() - 1], &extraction.maps, &out)?;
        let inv = inverse_transposes(&extraction.maps[j], &w, opts.rank_tol)?;
        out[j] = Some(tensor.multilinear_apply(&inv)?);
    }
    let result: Vec<DenseTensor> = out
        .into_iter()
        .map(|k| k.unwrap_or_else(|| DenseTensor::zeros(&vec![d; t])))
        .collect();
    for (c, k) in extraction.cumulants.iter_mut().zip(&result) {
        c.insert(t, k.clone());
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_repeats_last() {
        assert_eq!(padded(&[1], 2), vec![1, 1]);
        assert_eq!(padded(&[1, 2], 4), vec![1, 2, 2, 2]);
        assert_eq!(padded(&[1, 2], 2), vec![1, 2]);
    }
}
