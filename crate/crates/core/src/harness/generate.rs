use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Setting};
use crate::cumulant::SampleMatrix;
use crate::error::{RcaError, Result};
use crate::general::SetSystem;
use crate::gradient::ising::IsingSpec;
use crate::gradient::sigmoid;
use crate::tensor::{smallest_singular_value, LinearMap};

/// Random cross-view maps are redrawn until their smallest singular value
/// reaches this.
pub const MIN_MAP_SIGMA: f64 = 0.1;
const MAX_MAP_DRAWS: usize = 10_000;

/// The quantity each setting tries to recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// Unit principal direction (sign free).
    Direction(Vec<f64>),
    /// Regression or logistic weights.
    Coefficients(Vec<f64>),
    Centers {
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
        sigma2: f64,
    },
    Couplings(IsingSpec),
    /// `maps[j][i]` for component `j` and view `i` (views numbered from 1).
    Maps(Vec<BTreeMap<usize, LinearMap>>),
}

/// Observed views plus everything hidden from the estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// `[U, V]` for two-view settings, `U_1..U_k` for `general`.
    pub views: Vec<SampleMatrix>,
    /// Hidden component samples: `[S1, S2, S3]` for two-view settings.
    pub components: Vec<SampleMatrix>,
    /// The map from the shared component into `V` (two-view settings).
    pub a: Option<LinearMap>,
    pub labels: Option<Vec<f64>>,
    pub truth: GroundTruth,
    /// Dimension of the shared component's support when it is known to be
    /// smaller than the view dimension.
    pub shared_rank: Option<usize>,
    pub set_system: Option<SetSystem>,
}

impl Dataset {
    pub fn u(&self) -> &SampleMatrix {
        &self.views[0]
    }

    pub fn v(&self) -> &SampleMatrix {
        &self.views[1]
    }

    /// Hidden samples of the target component.
    pub fn s1(&self) -> &SampleMatrix {
        &self.components[0]
    }
}

pub fn uniform_samples<R: Rng>(rng: &mut R, n: usize, d: usize, lo: f64, hi: f64) -> SampleMatrix {
    let data = (0..n * d).map(|_| rng.random_range(lo..hi)).collect();
    SampleMatrix::new(n, d, data).expect("positive shape")
}

pub fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `Unif[-1, 1]` entries, redrawn until `sigma_min >= MIN_MAP_SIGMA`.
pub fn random_map<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Result<LinearMap> {
    for _ in 0..MAX_MAP_DRAWS {
        let a = LinearMap::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        if smallest_singular_value(&a) >= MIN_MAP_SIGMA {
            return Ok(a);
        }
    }
    Err(RcaError::Numeric(format!(
        "no {rows}x{cols} map with smallest singular value >= {MIN_MAP_SIGMA} in {MAX_MAP_DRAWS} draws"
    )))
}

/// Rows `w ~ Unif[-1, 1]^d` mapped by `I + v v^T`.
fn spiked_uniform<R: Rng>(rng: &mut R, n: usize, v: &[f64]) -> SampleMatrix {
    let d = v.len();
    let mut x = uniform_samples(rng, n, d, -1.0, 1.0);
    for row in x.data_mut().chunks_exact_mut(d) {
        let proj: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        row.iter_mut().zip(v).for_each(|(r, vi)| *r += proj * vi);
    }
    x
}

fn trace_cov(x: &SampleMatrix) -> f64 {
    x.covariance().trace()
}

/// Rescales `s2` so that `tr Cov(s2) = ratio^2 tr Cov(s1)`.
fn match_ratio(s1: &SampleMatrix, s2: &SampleMatrix, ratio: f64) -> SampleMatrix {
    let t2 = trace_cov(s2);
    if t2 == 0.0 {
        return s2.clone();
    }
    s2.scale(ratio * (trace_cov(s1) / t2).sqrt())
}

fn normal_matrix<R: Rng>(rng: &mut R, n: usize, d: usize, scale: f64) -> SampleMatrix {
    let data = (0..n * d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    SampleMatrix::new(n, d, data).expect("positive shape")
}

/// `n` draws from an equal-weight spherical mixture.
fn mixture_samples<R: Rng>(rng: &mut R, n: usize, centers: &[Vec<f64>], sigma: f64) -> SampleMatrix {
    let d = centers[0].len();
    let mut x = normal_matrix(rng, n, d, sigma);
    for row in x.data_mut().chunks_exact_mut(d) {
        let c = &centers[rng.random_range(0..centers.len())];
        row.iter_mut().zip(c).for_each(|(r, m)| *r += m);
    }
    x
}

fn assemble(
    s1: SampleMatrix,
    s2: SampleMatrix,
    s3: SampleMatrix,
    a: LinearMap,
    ratio: Option<f64>,
) -> Result<(Vec<SampleMatrix>, Vec<SampleMatrix>, LinearMap)> {
    let s2 = match ratio {
        Some(r) => match_ratio(&s1, &s2, r),
        None => s2,
    };
    let u = s1.add(&s2)?;
    let v = s2.transform(&a)?.add(&s3)?;
    Ok((vec![u, v], vec![s1, s2, s3], a))
}

/// Synthetic data for `config` drawn from `seed`; identical inputs give
/// identical bytes.
pub fn generate(config: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    let (n, d) = (config.n, config.d);
    let ratio = config.perturbation_ratio;
    let two_view = |s1, s2, s3, a, labels, truth, shared_rank| -> Result<Dataset> {
        let (views, components, a) = assemble(s1, s2, s3, a, ratio)?;
        Ok(Dataset {
            views,
            components,
            a: Some(a),
            labels,
            truth,
            shared_rank,
            set_system: None,
        })
    };
    match config.setting {
        Setting::Pca => {
            let v1 = unit_vector(rng, d);
            let v2 = unit_vector(rng, d);
            let a = random_map(rng, d, d)?;
            let mut s1 = normal_matrix(rng, n, d, config.sigma);
            for row in s1.data_mut().chunks_exact_mut(d) {
                let z: f64 = rng.sample(StandardNormal);
                row.iter_mut().zip(&v1).for_each(|(r, v)| *r += z * v);
            }
            let s2 = spiked_uniform(rng, n, &v2);
            let s3 = uniform_samples(rng, n, d, -1.0, 1.0);
            two_view(s1, s2, s3, a, None, GroundTruth::Direction(v1), None)
        }
        Setting::Regression | Setting::Logistic => {
            let beta = unit_vector(rng, d);
            let v2 = unit_vector(rng, d);
            let a = random_map(rng, d, d)?;
            let s1 = uniform_samples(rng, n, d, -1.0, 1.0);
            let labels = labels_for(rng, &s1, &beta, config.setting == Setting::Logistic);
            let s2 = spiked_uniform(rng, n, &v2);
            let s3 = uniform_samples(rng, n, d, -1.0, 1.0);
            two_view(s1, s2, s3, a, Some(labels), GroundTruth::Coefficients(beta), None)
        }
        Setting::Gmm => {
            let centers: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let mut shared: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            // the shared component is kept mean zero
            let mean: Vec<f64> = (0..d).map(|c| shared.iter().map(|m| m[c]).sum::<f64>() / d as f64).collect();
            shared.iter_mut().for_each(|m| m.iter_mut().zip(&mean).for_each(|(x, y)| *x -= y));
            let a = random_map(rng, d, d)?;
            let s1 = mixture_samples(rng, n, &centers, config.sigma);
            let s2 = mixture_samples(rng, n, &shared, config.sigma);
            let s3 = uniform_samples(rng, n, d, -1.0, 1.0);
            let truth = GroundTruth::Centers {
                centers,
                weights: vec![1.0 / d as f64; d],
                sigma2: config.sigma * config.sigma,
            };
            two_view(s1, s2, s3, a, None, truth, None)
        }
        Setting::Ising => {
            let spec = IsingSpec::random_torus(d, 1.0, rng)?;
            let p = d * d;
            let a = random_map(rng, p, p)?;
            let s1 = spec.sample(n, rng)?;
            let s2 = ising_perturbation(rng, n, p);
            let s3 = uniform_samples(rng, n, p, -1.0, 1.0);
            let independent = p / 2;
            two_view(s1, s2, s3, a, None, GroundTruth::Couplings(spec), Some(independent + 1))
        }
        Setting::BiomarkerSim => {
            let beta = unit_vector(rng, d);
            let a = random_map(rng, d, d)?;
            let s1 = uniform_samples(rng, n, d, 0.0, 1.0);
            let labels = labels_for(rng, &s1, &beta, true);
            // two labs with opposite offsets, each sample assigned at random
            let bias: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let mut s2 = SampleMatrix::zeros(n, d);
            for row in s2.data_mut().chunks_exact_mut(d) {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                row.iter_mut().zip(&bias).for_each(|(r, b)| *r = sign * b);
            }
            let s3 = uniform_samples(rng, n, d, 0.0, 1.0);
            two_view(s1, s2, s3, a, Some(labels), GroundTruth::Coefficients(beta), Some(1))
        }
        Setting::General => generate_general(config, rng),
    }
}

fn labels_for<R: Rng>(rng: &mut R, s1: &SampleMatrix, beta: &[f64], logistic: bool) -> Vec<f64> {
    s1.rows()
        .map(|r| {
            let z: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
            if logistic {
                if rng.random::<f64>() < sigmoid(z) {
                    1.0
                } else {
                    0.0
                }
            } else {
                z + rng.sample::<f64, _>(StandardNormal)
            }
        })
        .collect()
}

/// Spin grid where the first half of the sites are independent fair spins and
/// the rest share one fair spin.
fn ising_perturbation<R: Rng>(rng: &mut R, n: usize, p: usize) -> SampleMatrix {
    let independent = p / 2;
    let mut x = SampleMatrix::zeros(n, p);
    let fair = |rng: &mut R| if rng.random::<bool>() { 1.0 } else { -1.0 };
    for row in x.data_mut().chunks_exact_mut(p) {
        for r in row.iter_mut().take(independent) {
            *r = fair(rng);
        }
        let common = fair(rng);
        row.iter_mut().skip(independent).for_each(|r| *r = common);
    }
    x
}

/// Default system for the `general` setting: three views, one component per
/// view and one shared by the first two.
pub fn default_general_system() -> SetSystem {
    SetSystem::new(3, vec![vec![1], vec![1, 2], vec![2], vec![2, 3], vec![3]]).expect("valid system")
}

/// Components with independent centred `Exp(1)` coordinates (skewed, so
/// third-order cumulants carry signal); the smallest view of each component
/// receives it unchanged.
fn generate_general<R: Rng>(config: &ExperimentConfig, rng: &mut R) -> Result<Dataset> {
    let system = config.set_system.clone().unwrap_or_else(default_general_system);
    let (n, d) = (config.n, config.d);
    let exp = Exp::new(1.0).expect("unit rate");
    let mut maps = Vec::with_capacity(system.len());
    for q in system.subsets() {
        let mut m = BTreeMap::new();
        for (pos, &view) in q.iter().enumerate() {
            let a = if pos == 0 {
                LinearMap::identity(d, d)
            } else {
                random_map(rng, d, d)?
            };
            m.insert(view, a);
        }
        maps.push(m);
    }
    let mut views = vec![SampleMatrix::zeros(n, d); system.k()];
    let mut components = Vec::with_capacity(system.len());
    for m in &maps {
        let data = (0..n * d).map(|_| exp.sample(rng) - 1.0).collect();
        let s = SampleMatrix::new(n, d, data)?;
        for (&view, a) in m {
            views[view - 1] = views[view - 1].add(&s.transform(a)?)?;
        }
        components.push(s);
    }
    Ok(Dataset {
        views,
        components,
        a: None,
        labels: None,
        truth: GroundTruth::Maps(maps),
        shared_rank: None,
        set_system: Some(system),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_identical_data() {
        for setting in Setting::ALL {
            let cfg = ExperimentConfig {
                d: if setting == Setting::Ising { 3 } else { 4 },
                ..ExperimentConfig::new(setting, 4, 50, 9)
            };
            let a = serde_json::to_string(&generate(&cfg, 9).unwrap()).unwrap();
            let b = serde_json::to_string(&generate(&cfg, 9).unwrap()).unwrap();
            assert_eq!(a, b, "{setting}");
            let c = serde_json::to_string(&generate(&cfg, 10).unwrap()).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn views_are_assembled_exactly() {
        let cfg = ExperimentConfig::new(Setting::Pca, 5, 40, 1);
        let data = generate(&cfg, 1).unwrap();
        let [s1, s2, s3] = &data.components[..] else { panic!() };
        assert_eq!(&s1.add(s2).unwrap(), data.u());
        let v = s2.transform(data.a.as_ref().unwrap()).unwrap().add(s3).unwrap();
        assert_eq!(&v, data.v());
    }

    #[test]
    fn ratio_rescales_shared_component() {
        let cfg = ExperimentConfig {
            perturbation_ratio: Some(0.5),
            ..ExperimentConfig::new(Setting::Regression, 6, 500, 2)
        };
        let data = generate(&cfg, 2).unwrap();
        let r = (trace_cov(&data.components[1]) / trace_cov(&data.components[0])).sqrt();
        assert!((r - 0.5).abs() < 1e-12);
        let zero = ExperimentConfig {
            perturbation_ratio: Some(0.0),
            ..cfg
        };
        let data = generate(&zero, 2).unwrap();
        assert!(data.components[1].data().iter().all(|x| *x == 0.0));
        assert_eq!(data.u(), data.s1());
    }

    #[test]
    fn random_maps_are_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in [2, 10, 25] {
            assert!(smallest_singular_value(&random_map(&mut rng, d, d).unwrap()) >= MIN_MAP_SIGMA);
        }
    }

    #[test]
    fn ising_perturbation_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = ising_perturbation(&mut rng, 30, 9);
        for r in x.rows() {
            assert!(r.iter().all(|s| s.abs() == 1.0));
            assert!(r[4..].iter().all(|&s| s == r[4]));
        }
    }
}
