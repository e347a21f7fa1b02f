use approx::assert_relative_eq;
use hdperm::ridge::assign_folds;
use hdperm::{select_penalty, CvConfig, RidgeProjector};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// `Z (ZᵀZ + λI)⁻¹ Zᵀ` assembled densely in the primal form.
fn dense_hat_primal(z: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let q = z.ncols();
    let inner = (z.transpose() * z + DMatrix::identity(q, q) * lambda)
        .try_inverse()
        .unwrap();
    z * inner * z.transpose()
}

/// `Z Zᵀ (Z Zᵀ + λI)⁻¹`, the equivalent n×n dual form.
fn dense_hat_dual(z: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = z.nrows();
    let k = z * z.transpose();
    &k * (&k + DMatrix::identity(n, n) * lambda).try_inverse().unwrap()
}

#[test]
fn hat_eigenvalues_match_shrinkage_factors() {
    let z = gaussian(10, 25, 1);
    let proj = RidgeProjector::decompose(&z).unwrap();
    assert_eq!(proj.rank(), 10);
    for lambda in [0.1, 1.0, 10.0] {
        let h = dense_hat_dual(&z, lambda);
        let sym = (&h + h.transpose()) * 0.5;
        let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut expected: Vec<f64> = proj
            .singular_values()
            .iter()
            .map(|s| s * s / (s * s + lambda))
            .collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (e, x) in eig.iter().zip(&expected) {
            assert!((e - x).abs() <= 1e-10, "lambda {lambda}: {e} vs {x}");
            assert!(*x > 0.0 && *x < 1.0);
        }
    }
}

#[test]
fn operators_agree_with_dense_forms() {
    for (n, q, seed) in [(20, 5, 2), (12, 40, 3)] {
        let z = gaussian(n, q, seed);
        let v = DVector::from_column_slice(gaussian(n, 1, seed + 100).as_slice());
        let proj = RidgeProjector::decompose(&z).unwrap();
        for lambda in [0.01, 1.0, 50.0] {
            let dense = if q < n {
                dense_hat_primal(&z, lambda)
            } else {
                dense_hat_dual(&z, lambda)
            };
            let expected = &dense * &v;
            let got = proj.apply_hat(lambda, &v).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-8, epsilon = 1e-12);
            let resid = proj.apply_residual(lambda, &v).unwrap();
            assert_relative_eq!(&got + &resid, v.clone(), max_relative = 1e-14, epsilon = 1e-14);
        }
        assert_relative_eq!(
            dense_hat_primal(&z, 1.0),
            dense_hat_dual(&z, 1.0),
            max_relative = 1e-8,
            epsilon = 1e-10
        );
    }
}

#[test]
fn ols_residual_maker_is_idempotent() {
    let z = gaussian(15, 4, 4);
    let proj = RidgeProjector::decompose(&z).unwrap();
    let v = DVector::from_column_slice(gaussian(15, 1, 5).as_slice());
    let once = proj.apply_residual(0.0, &v).unwrap();
    let twice = proj.apply_residual(0.0, &once).unwrap();
    assert_relative_eq!(once, twice, epsilon = 1e-10);
    let in_span = &z * DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
    assert!(proj.apply_residual(0.0, &in_span).unwrap().norm() < 1e-10 * in_span.norm());
}

#[test]
fn noiseless_target_in_span_selects_smallest_penalty() {
    let z = gaussian(40, 3, 6);
    let y = &z * DVector::from_vec(vec![1.0, 2.0, -1.0]);
    let sel = select_penalty(&z, &y, &CvConfig::default()).unwrap();
    assert_eq!(sel.chosen_index, 0);
    assert_relative_eq!(sel.chosen, 40.0 * 1e-5, max_relative = 1e-12);
}

#[test]
fn pure_noise_target_prefers_heavy_shrinkage() {
    // Averaged over datasets, held-out error of pure noise decreases with the penalty.
    let mut high = 0;
    for seed in 0..20 {
        let z = gaussian(200, 5, 1000 + seed);
        let y = DVector::from_column_slice(gaussian(200, 1, 2000 + seed).as_slice());
        let sel = select_penalty(
            &z,
            &y,
            &CvConfig {
                seed,
                ..CvConfig::default()
            },
        )
        .unwrap();
        let errors = &sel.cv_errors;
        assert!(errors[99] < errors[0]);
        if sel.chosen_index >= 50 {
            high += 1;
        }
    }
    assert!(high >= 15, "only {high} of 20 selections in the upper half of the grid");
}

#[test]
fn cross_validation_is_deterministic() {
    let z = gaussian(30, 50, 7);
    let y = DVector::from_column_slice(gaussian(30, 1, 8).as_slice());
    let cfg = CvConfig {
        seed: 99,
        ..CvConfig::default()
    };
    let a = select_penalty(&z, &y, &cfg).unwrap();
    let b = select_penalty(&z, &y, &cfg).unwrap();
    assert_eq!(a, b);
    let c = select_penalty(&z, &y, &CvConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.fold_assignment, c.fold_assignment);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hat_minus_square_is_positive_on_column_space(
        seed in any::<u64>(),
        n in 4usize..14,
        q in 1usize..30,
        log_lambda in -3.0f64..3.0,
    ) {
        let lambda = 10f64.powf(log_lambda);
        let z = gaussian(n, q, seed);
        let proj = RidgeProjector::decompose(&z).unwrap();
        let h = proj.hat_matrix(lambda).unwrap();
        let m = &h - &h * &h;
        let u = proj.basis();
        let v = u * DVector::from_column_slice(gaussian(proj.rank(), 1, seed ^ 0xabc).as_slice());
        let quad = v.dot(&(&m * &v));
        let s = proj.singular_values();
        let floor = s.iter().map(|s| {
            let f = s * s / (s * s + lambda);
            f - f * f
        }).fold(f64::INFINITY, f64::min);
        prop_assert!(quad > 0.0);
        prop_assert!(quad >= floor * v.norm_squared() * (1.0 - 1e-8));
    }

    #[test]
    fn hat_is_symmetric_and_contracting(seed in any::<u64>(), n in 3usize..12, q in 1usize..20, lambda in 1e-3f64..1e3) {
        let z = gaussian(n, q, seed);
        let proj = RidgeProjector::decompose(&z).unwrap();
        let h = proj.hat_matrix(lambda).unwrap();
        prop_assert!((&h - h.transpose()).amax() < 1e-12);
        let v = DVector::from_column_slice(gaussian(n, 1, seed.wrapping_add(1)).as_slice());
        prop_assert!(proj.apply_hat(lambda, &v).unwrap().norm() <= v.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn folds_are_balanced(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let a = assign_folds(n, k, seed).unwrap();
        let mut sizes = vec![0usize; k];
        for f in a {
            sizes[f] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(*lo >= 1 && hi - lo <= 1);
    }
}
