use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use super::{cross_cumulant, ComponentCumulants, SampleMatrix};
use crate::error::{RcaError, Result};
use crate::tensor::{DenseTensor, LinearMap};

/// Anything that can answer cross-cumulant queries over a fixed set of views.
///
/// Views are indexed from 0. Sampled data and exact population models share
/// this interface so the separation algorithms run unchanged on both.
pub trait CumulantSource {
    fn n_views(&self) -> usize;
    fn view_dim(&self, view: usize) -> usize;
    /// Sample count, or 0 for exact population inputs.
    fn n_samples(&self) -> usize;
    /// `kappa_t(U_{v_1}, ..., U_{v_t})` with modes in the given order.
    fn cross_cumulant(&self, views: &[usize]) -> Result<DenseTensor>;
    fn view_mean(&self, view: usize) -> Vec<f64>;
    /// Largest observed sample norm across views (0 for population inputs).
    fn radius_bound(&self) -> f64;
}

/// Row-aligned sampled views, centered on construction.
#[derive(Debug)]
pub struct SampleViews {
    views: Vec<SampleMatrix>,
    means: Vec<Vec<f64>>,
    radius: f64,
    cache: Mutex<HashMap<Vec<usize>, DenseTensor>>,
}

impl SampleViews {
    pub fn new(views: &[&SampleMatrix]) -> Result<Self> {
        let n = views
            .first()
            .ok_or_else(|| RcaError::InvalidInput("no views given".into()))?
            .n();
        for (index, v) in views.iter().enumerate() {
            if v.n() != n {
                return Err(RcaError::Alignment {
                    index,
                    expected: n,
                    found: v.n(),
                });
            }
        }
        Ok(SampleViews {
            means: views.iter().map(|v| v.mean()).collect(),
            radius: views.iter().map(|v| v.max_row_norm()).fold(0.0, f64::max),
            views: views.iter().map(|v| v.centered()).collect(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Centered samples of one view.
    pub fn view(&self, view: usize) -> &SampleMatrix {
        &self.views[view]
    }
}

impl CumulantSource for SampleViews {
    fn n_views(&self) -> usize {
        self.views.len()
    }

    fn view_dim(&self, view: usize) -> usize {
        self.views[view].d()
    }

    fn n_samples(&self) -> usize {
        self.views[0].n()
    }

    fn cross_cumulant(&self, views: &[usize]) -> Result<DenseTensor> {
        if let Some(&bad) = views.iter().find(|&&v| v >= self.views.len()) {
            return Err(RcaError::InvalidInput(format!("view {bad} does not exist")));
        }
        if let Some(hit) = self.cache.lock().unwrap().get(views) {
            return Ok(hit.clone());
        }
        let inputs: Vec<&SampleMatrix> = views.iter().map(|&v| &self.views[v]).collect();
        let k = cross_cumulant(&inputs, false)?.tensor;
        self.cache.lock().unwrap().insert(views.to_vec(), k.clone());
        Ok(k)
    }

    fn view_mean(&self, view: usize) -> Vec<f64> {
        self.means[view].clone()
    }

    fn radius_bound(&self) -> f64 {
        self.radius
    }
}

/// One latent component of a population model: its cumulants and the map
/// into every view it feeds.
#[derive(Debug, Clone)]
pub struct PopulationComponent {
    pub maps: BTreeMap<usize, LinearMap>,
    pub cumulants: ComponentCumulants,
}

/// Exact cross-cumulants of views `U_i = sum_j A^{(i,j)} S_j` with independent
/// components, assembled from the component cumulants by multilinearity.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    view_dims: Vec<usize>,
    components: Vec<PopulationComponent>,
}

impl PopulationModel {
    pub fn new(view_dims: Vec<usize>, components: Vec<PopulationComponent>) -> Result<Self> {
        for (j, c) in components.iter().enumerate() {
            for (&view, m) in &c.maps {
                let d = *view_dims.get(view).ok_or_else(|| {
                    RcaError::InvalidInput(format!("component {j} maps into missing view {view}"))
                })?;
                if m.nrows() != d || m.ncols() != c.cumulants.dim() {
                    return Err(RcaError::InvalidInput(format!(
                        "component {j}: map into view {view} is {}x{}, expected {d}x{}",
                        m.nrows(),
                        m.ncols(),
                        c.cumulants.dim()
                    )));
                }
            }
        }
        Ok(PopulationModel {
            view_dims,
            components,
        })
    }

    pub fn components(&self) -> &[PopulationComponent] {
        &self.components
    }
}

impl CumulantSource for PopulationModel {
    fn n_views(&self) -> usize {
        self.view_dims.len()
    }

    fn view_dim(&self, view: usize) -> usize {
        self.view_dims[view]
    }

    fn n_samples(&self) -> usize {
        0
    }

    fn cross_cumulant(&self, views: &[usize]) -> Result<DenseTensor> {
        let dims: Vec<usize> = views.iter().map(|&v| self.view_dims[v]).collect();
        let mut out = DenseTensor::zeros(&dims);
        for c in &self.components {
            if !views.iter().all(|v| c.maps.contains_key(v)) {
                continue;
            }
            let k = c.cumulants.require(views.len())?;
            let maps: Vec<LinearMap> = views.iter().map(|v| c.maps[v].transpose()).collect();
            out.axpy(1.0, &k.multilinear_apply(&maps)?)?;
        }
        Ok(out)
    }

    fn view_mean(&self, view: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.view_dims[view]];
        for c in &self.components {
            if let Some(a) = c.maps.get(&view) {
                let mu = a * nalgebra::DVector::from_column_slice(&c.cumulants.mean);
                for (o, x) in m.iter_mut().zip(mu.iter()) {
                    *o += x;
                }
            }
        }
        m
    }

    fn radius_bound(&self) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_views_match_direct_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let u = SampleMatrix::new(100, 2, (0..200).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let v = SampleMatrix::new(100, 3, (0..300).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let src = SampleViews::new(&[&u, &v]).unwrap();
        let direct = cross_cumulant(&[&u, &v, &u], true).unwrap().tensor;
        let via = src.cross_cumulant(&[0, 1, 0]).unwrap();
        assert!(direct.max_abs_diff(&via) < 1e-14);
        // second call is served from the cache
        assert_eq!(src.cross_cumulant(&[0, 1, 0]).unwrap(), via);
    }

    #[test]
    fn population_model_applies_maps() {
        let mut cc = ComponentCumulants::new(vec![1.0, 0.0]);
        cc.insert(2, DenseTensor::from_matrix(&LinearMap::identity(2, 2)));
        let a = LinearMap::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let model = PopulationModel::new(
            vec![2, 2],
            vec![PopulationComponent {
                maps: BTreeMap::from([(0, LinearMap::identity(2, 2)), (1, a.clone())]),
                cumulants: cc,
            }],
        )
        .unwrap();
        let k = model.cross_cumulant(&[1, 1]).unwrap().to_matrix().unwrap();
        assert!((k - &a * a.transpose()).abs().max() < 1e-15);
        assert_eq!(model.view_mean(1), vec![1.0, 0.0]);
    }
}
