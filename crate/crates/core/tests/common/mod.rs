#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rca::cumulant::{ComponentCumulants, PopulationComponent, PopulationModel, SampleMatrix};
use rca::tensor::{DenseTensor, LinearMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, d: usize) -> SampleMatrix {
    SampleMatrix::new(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> LinearMap {
    LinearMap::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Prints the one-line verdict for an acceptance criterion and returns it.
pub fn verdict(criterion: &str, pass: bool, detail: &str) -> bool {
    println!("criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Cumulants of a component with independent coordinates: variance on the
/// diagonal and the given diagonal cumulant per order.
pub fn independent_coords(variance: f64, diag: &[(usize, f64)], d: usize) -> ComponentCumulants {
    let mut c = ComponentCumulants::new(vec![0.0; d]);
    c.insert(2, DenseTensor::from_fn(&[d, d], |i| if i[0] == i[1] { variance } else { 0.0 }));
    for &(t, k) in diag {
        c.insert(t, DenseTensor::from_fn(&vec![d; t], |i| if i.iter().all(|&x| x == i[0]) { k } else { 0.0 }));
    }
    c
}

/// Uniform on [-1, 1]: variance 1/3, no skew, fourth cumulant -2/15.
pub fn uniform_cumulants(d: usize) -> ComponentCumulants {
    independent_coords(1.0 / 3.0, &[(3, 0.0), (4, -2.0 / 15.0)], d)
}

/// Centred Exp(1): cumulants 1, 2, 6.
pub fn exponential_cumulants(d: usize) -> ComponentCumulants {
    independent_coords(1.0, &[(3, 2.0), (4, 6.0)], d)
}

/// Exact cumulants of `U = S1 + S2`, `V = A S2 + S3` (views 0 and 1).
pub fn contrastive_model(
    a: &LinearMap,
    s1: ComponentCumulants,
    s2: ComponentCumulants,
    s3: ComponentCumulants,
) -> PopulationModel {
    let (du, dv) = (a.ncols(), a.nrows());
    PopulationModel::new(
        vec![du, dv],
        vec![
            PopulationComponent {
                maps: BTreeMap::from([(0, LinearMap::identity(du, du))]),
                cumulants: s1,
            },
            PopulationComponent {
                maps: BTreeMap::from([(0, LinearMap::identity(du, du)), (1, a.clone())]),
                cumulants: s2,
            },
            PopulationComponent {
                maps: BTreeMap::from([(1, LinearMap::identity(dv, dv))]),
                cumulants: s3,
            },
        ],
    )
    .unwrap()
}

/// All set partitions of `0..t` by restricted growth strings.
pub fn set_partitions(t: usize) -> Vec<Vec<Vec<usize>>> {
    fn grow(pos: usize, t: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if pos == t {
            let blocks = labels.iter().copied().max().map_or(0, |m| m + 1);
            let mut p = vec![Vec::new(); blocks];
            for (i, &l) in labels.iter().enumerate() {
                p[l].push(i);
            }
            out.push(p);
            return;
        }
        let next = labels.iter().copied().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            labels.push(l);
            grow(pos + 1, t, labels, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    grow(0, t, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Entry `idx` of the plug-in cross-cumulant, summed term by term over set
/// partitions with raw (uncentred) sample moments.
pub fn brute_force_cumulant_entry(inputs: &[&SampleMatrix], idx: &[usize]) -> f64 {
    let n = inputs[0].n();
    let mut total = 0.0;
    for p in set_partitions(inputs.len()) {
        let b = p.len();
        let weight = factorial(b - 1) * if b % 2 == 1 { 1.0 } else { -1.0 };
        let mut prod = 1.0;
        for block in &p {
            let mut m = 0.0;
            for r in 0..n {
                m += block.iter().map(|&l| inputs[l].row(r)[idx[l]]).product::<f64>();
            }
            prod *= m / n as f64;
        }
        total += weight * prod;
    }
    total
}
