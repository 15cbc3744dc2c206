mod common;

use proptest::prelude::*;

use common::*;
use rca::contrastive::{extract_cumulants, run_contrastive, ContrastiveOptions};
use rca::cumulant::{cross_cumulant, ComponentCumulants, SampleMatrix};
use rca::general::{check_distinguishable, find_linear, Distinguishability, GeneralOptions, SetSystem};
use rca::gradient::{approx_gd, chebyshev_sigmoid, eval_poly, ApproxGdConfig};
use rca::gradient::ising::IsingSpec;
use rca::learners::{contrastive_pca, matched_center_mse, top_eigenvector};
use rca::tensor::{DenseTensor, LinearMap};

fn views(seed: u64, n: usize, d: usize) -> (SampleMatrix, SampleMatrix) {
    let mut rng = rng(seed);
    let s1 = uniform(&mut rng, n, d);
    let s2 = uniform(&mut rng, n, d).transform(&random_matrix(&mut rng, d, d)).unwrap();
    let s3 = uniform(&mut rng, n, d);
    let a = random_matrix(&mut rng, d, d);
    (s1.add(&s2).unwrap(), s2.transform(&a).unwrap().add(&s3).unwrap())
}

fn is_symmetric(t: &DenseTensor) -> bool {
    t.max_abs_diff(&t.symmetrize().unwrap()) <= 1e-12 * t.max_abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cumulant_follows_permuted_inputs(seed in any::<u64>(), t in 2usize..=4, rot in 1usize..4) {
        let mut rng = rng(seed);
        let xs: Vec<SampleMatrix> = (0..t).map(|l| uniform(&mut rng, 15, 1 + l % 2)).collect();
        let perm: Vec<usize> = (0..t).map(|l| (l + rot) % t).collect();
        let base = cross_cumulant(&xs.iter().collect::<Vec<_>>(), true).unwrap().tensor;
        let permuted = cross_cumulant(&perm.iter().map(|&l| &xs[l]).collect::<Vec<_>>(), true).unwrap().tensor;
        prop_assert!(permuted.max_abs_diff(&base.permute_modes(&perm).unwrap()) <= 1e-14);
    }

    #[test]
    fn cumulant_is_multilinear(seed in any::<u64>(), t in 1usize..=4, mode in 0usize..4, scale in -3.0f64..3.0) {
        let mode = mode % t;
        let mut rng = rng(seed);
        let xs: Vec<SampleMatrix> = (0..t).map(|_| uniform(&mut rng, 12, 2)).collect();
        let y = uniform(&mut rng, 12, 2);
        let b = random_matrix(&mut rng, 3, 2);
        let k = |replacement: &SampleMatrix| {
            let mut inputs: Vec<&SampleMatrix> = xs.iter().collect();
            inputs[mode] = replacement;
            cross_cumulant(&inputs, false).unwrap().tensor
        };
        let base = k(&xs[mode]);
        let mut maps: Vec<LinearMap> = (0..t).map(|_| LinearMap::identity(2, 2)).collect();
        maps[mode] = b.transpose();
        let mapped = k(&xs[mode].transform(&b).unwrap());
        prop_assert!(mapped.max_abs_diff(&base.multilinear_apply(&maps).unwrap()) <= 1e-12);
        let combo = xs[mode].scale(scale).add(&y).unwrap();
        let split = base.scale(scale).add(&k(&y)).unwrap();
        prop_assert!(k(&combo).max_abs_diff(&split) <= 1e-12);
    }

    #[test]
    fn extraction_splits_u_and_stays_symmetric(seed in any::<u64>(), d in 1usize..=3) {
        let (u, v) = views(seed, 300, d);
        let Ok(ext) = run_contrastive(&u, &v, 4, &ContrastiveOptions::default()) else {
            return Ok(());
        };
        let total = ComponentCumulants::from_samples(&u, 4).unwrap();
        for t in 2..=4 {
            let s1 = ext.s1.require(t).unwrap();
            let s2 = ext.s2.require(t).unwrap();
            let u_t = total.require(t).unwrap().symmetrize().unwrap();
            let gap = s1.add(s2).unwrap().max_abs_diff(&u_t);
            prop_assert!(gap <= 1e-12 * (1.0 + s1.max_abs() + s2.max_abs()), "order {} gap {}", t, gap);
            for comp in [&ext.s1, &ext.s2, &ext.s3] {
                prop_assert!(is_symmetric(comp.require(t).unwrap()));
            }
        }
        let c = &ext.diagnostics;
        prop_assert!(c.sigma4.unwrap_or(0.0) >= 0.0 && c.sigma_a >= 0.0 && c.spectral_a >= 0.0 && c.radius_bound >= 0.0);
    }

    #[test]
    fn extraction_is_linear_in_a_supplied_map(seed in any::<u64>()) {
        // with the true map fixed, the shared estimate is kappa(U, A^+ V)
        let mut rng = rng(seed);
        let a = random_matrix(&mut rng, 2, 2);
        let s2 = uniform(&mut rng, 200, 2);
        let u = uniform(&mut rng, 200, 2).add(&s2).unwrap();
        let v = s2.transform(&a).unwrap().add(&uniform(&mut rng, 200, 2)).unwrap();
        let Ok(ext) = extract_cumulants(&u, &v, &a, 2) else { return Ok(()); };
        let w = v.transform(&rca::tensor::pinv(&a, 1e-12).unwrap()).unwrap();
        let direct = cross_cumulant(&[&u, &w], true).unwrap().tensor.symmetrize().unwrap();
        prop_assert!(ext.s2.require(2).unwrap().max_abs_diff(&direct) <= 1e-10);
    }

    #[test]
    fn certificates_satisfy_the_definition(k in 1usize..=4, masks in prop::collection::btree_set(1u32..16, 1..6), level in 1usize..=3) {
        let level = level.min(k);
        let subsets: Vec<Vec<usize>> = masks
            .iter()
            .map(|m| (0..k).filter(|i| m & (1 << i) != 0).map(|i| i + 1).collect::<Vec<_>>())
            .filter(|q| !q.is_empty())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        prop_assume!(!subsets.is_empty());
        let system = SetSystem::new(k, subsets.clone()).unwrap();
        if let Distinguishability::Certified(cert) = check_distinguishable(&system, level).unwrap() {
            for (j, tj) in cert.iter().enumerate() {
                prop_assert!(tj.len() <= level && tj.iter().all(|i| subsets[j].contains(i)));
                for q in subsets.iter().enumerate().filter(|&(jj, _)| jj != j).map(|(_, q)| q) {
                    let contains = subsets[j].iter().all(|i| q.contains(i));
                    let covers = tj.iter().all(|i| q.contains(i));
                    prop_assert!(contains || !covers, "T_{} = {:?} fails against {:?}", j, tj, q);
                }
            }
        }
    }

    #[test]
    fn smallest_view_map_is_identity(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = random_matrix(&mut rng, 2, 2);
        let model = contrastive_model(&a, exponential_cumulants(2), exponential_cumulants(2), exponential_cumulants(2));
        let system = SetSystem::contrastive();
        let Ok(ext) = find_linear(&model, &system, &GeneralOptions::default()) else { return Ok(()); };
        for (j, q) in system.subsets().iter().enumerate().filter(|(j, _)| !ext.zero_components.contains(j)) {
            let first = ext.map(q[0], j).unwrap();
            prop_assert_eq!(first, &LinearMap::identity(2, 2));
        }
    }

    #[test]
    fn pca_direction_is_unit_canonical_and_scale_free(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = rng(seed);
        let b = random_matrix(&mut rng, 3, 3);
        let m = &b * b.transpose();
        let r = top_eigenvector(&m).unwrap();
        let norm = r.top_eigenvector.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-10);
        let first = r.top_eigenvector.iter().find(|x| x.abs() > 1e-12).unwrap();
        prop_assert!(*first > 0.0);
        let scaled = top_eigenvector(&(&m * scale)).unwrap();
        for (x, y) in r.top_eigenvector.iter().zip(&scaled.top_eigenvector) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
        let mut c = ComponentCumulants::new(vec![0.0; 3]);
        c.insert(2, DenseTensor::from_matrix(&m));
        prop_assert_eq!(contrastive_pca(&c).unwrap().top_eigenvector, r.top_eigenvector);
    }

    #[test]
    fn center_matching_ignores_order(seed in any::<u64>(), k in 1usize..=4, rot in 0usize..4) {
        let mut rng = rng(seed);
        let truth: Vec<Vec<f64>> = (0..k).map(|_| random_matrix(&mut rng, 3, 1).iter().copied().collect()).collect();
        let est: Vec<Vec<f64>> = truth.iter().map(|c| c.iter().map(|x| x + 0.01).collect()).collect();
        let mut rotated = est.clone();
        rotated.rotate_left(rot % k);
        let a = matched_center_mse(&est, &truth);
        prop_assert!((a - matched_center_mse(&rotated, &truth)).abs() <= 1e-15);
        prop_assert!((a - 1e-4).abs() <= 1e-12);
    }

    #[test]
    fn sigmoid_fit_is_odd_about_one_half(x in -2.0f64..2.0) {
        let c = chebyshev_sigmoid(3).unwrap();
        prop_assert!((eval_poly(&c, x) - 0.5 + eval_poly(&c, -x) - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn exact_descent_contracts_at_the_stated_rate(mu in 0.1f64..2.0, ratio in 1.0f64..20.0, x0 in -5.0f64..5.0, y0 in -5.0f64..5.0) {
        let h = mu * ratio;
        let cfg = ApproxGdConfig {
            smoothness_h: h,
            strong_convexity_mu: mu,
            max_iters: 60,
            grad_tol: 0.0,
            record_path: true,
            ..ApproxGdConfig::default()
        };
        let (_, trace) = approx_gd(|th, _| Ok(vec![mu * th[0], h * th[1]]), &[x0, y0], &cfg).unwrap();
        let d0 = x0 * x0 + y0 * y0;
        for (t, th) in trace.path.iter().enumerate() {
            let bound = (1.0 - mu / (4.0 * h)).powi(t as i32) * d0;
            prop_assert!(th[0] * th[0] + th[1] * th[1] <= bound * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn torus_has_four_neighbours_per_site(side in 3usize..=6, seed in any::<u64>()) {
        let spec = IsingSpec::random_torus(side, 0.5, &mut rng(seed)).unwrap();
        prop_assert_eq!(spec.n_edges(), 2 * side * side);
        let mut degree = vec![0; side * side];
        for &(a, b) in spec.edges() {
            prop_assert!(a != b);
            degree[a] += 1;
            degree[b] += 1;
        }
        prop_assert!(degree.iter().all(|&g| g == 4));
    }
}
