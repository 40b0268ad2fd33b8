mod common;

use common::{dense_t, nu_oracle, oracle_cov, sorted_desc};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varcond::covariance::{
    apply, apply_inverse, covariance_spectrum, dense_covariance, normalization_diagnostic, sample,
    shifted_laplacian, CirculantOperator, CorrelationSpec, DiffusionOperator, Sampler,
};
use varcond::Error;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

#[test]
fn shifted_laplacian_landmarks() {
    let t = shifted_laplacian(1.0, 8).unwrap();
    assert_eq!(t.stencil(), &[3.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
    let dense = sorted_desc(SymmetricEigen::new(dense_t(1.0, 8)).eigenvalues.iter().copied());
    let ours = sorted_desc(t.spectrum().iter().copied());
    for (a, b) in ours.iter().zip(&dense) {
        assert!((a - b).abs() < 1e-12);
    }
    let t = shifted_laplacian(2.5, 10).unwrap();
    assert_eq!(t.spectrum()[0], 1.0);
    assert!((t.spectrum()[5] - 26.0).abs() < 1e-12);
}

#[test]
fn construction_errors() {
    assert!(CorrelationSpec::new(1.0, 2, 1.0, 1.0, 3).is_err());
    assert!(CorrelationSpec::new(0.0, 2, 1.0, 1.0, 16).is_err());
    assert!(matches!(CorrelationSpec::new(1.0, 11, 1.0, 1.0, 16), Err(Error::InvalidOrder(11))));
    assert!(CorrelationSpec::new(1.0, 2, 0.5, 1.0, 16).unwrap().discretization_warning());
    assert!(!CorrelationSpec::new(1.0, 2, 1.0, 1.0, 16).unwrap().discretization_warning());
    let big = CorrelationSpec::new(1.0, 2, 3.0, 1.0, 513).unwrap();
    assert!(matches!(dense_covariance(&big), Err(Error::SizeGuard { .. })));
    let spec = CorrelationSpec::new(1.0, 2, 3.0, 1.0, 16).unwrap();
    assert!(matches!(apply(&spec, &[1.0; 15]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn diagonal_limit() {
    let d = CorrelationSpec::diagonal(2.5, 4.0, 20).unwrap();
    assert!(covariance_spectrum(&d).spectrum().iter().all(|&l| (l - 2.5).abs() < 1e-15));
    assert_eq!(normalization_diagnostic(&d), 1.0);
    let v: Vec<f64> = (0..20).map(f64::from).collect();
    let y = apply(&d, &v).unwrap();
    assert!(y.iter().zip(&v).all(|(a, b)| (a - 2.5 * b).abs() < 1e-13));
}

#[test]
fn size_64_spectrum_matches_dense_oracle() {
    let spec = CorrelationSpec::new(1.7, 2, 4.0, 1.0, 64).unwrap();
    let dense = sorted_desc(SymmetricEigen::new(oracle_cov(1.7, 2, 4.0, 64)).eigenvalues.iter().copied());
    let ours = sorted_desc(spec.spectrum());
    for (a, b) in ours.iter().zip(&dense) {
        assert!((a / b - 1.0).abs() < 1e-10, "{a} vs {b}");
    }
    assert!((ours[0] - 1.7 * nu_oracle(2) * 4.0).abs() < 1e-12);
}

#[test]
fn apply_matches_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (m, lt) in [(1, 2.0), (2, 3.0), (6, 1.5), (10, 4.0)] {
        let spec = CorrelationSpec::new(0.8, m, lt, 1.0, 32).unwrap();
        let c = oracle_cov(0.8, m, lt, 32);
        let v = random_vec(&mut rng, 32);
        let want = &c * DVector::from_vec(v.clone());
        assert!(rel_err(&apply(&spec, &v).unwrap(), want.as_slice()) < 1e-10, "M={m}");
        let ones = apply(&spec, &[1.0; 32]).unwrap();
        assert!(ones.iter().all(|x| (x / (0.8 * nu_oracle(m) * lt) - 1.0).abs() < 1e-12));
    }
}

#[test]
fn inverse_round_trip_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = CorrelationSpec::new(1.0, 4, 3.0, 1.0, 50).unwrap();
    let op = DiffusionOperator::new(spec);
    for _ in 0..100 {
        let v = random_vec(&mut rng, 50);
        assert!(rel_err(&op.apply_inverse(&op.apply(&v).unwrap()).unwrap(), &v) < 1e-8);
        assert!(rel_err(&apply_inverse(&spec, &apply(&spec, &v).unwrap()).unwrap(), &v) < 1e-8);
    }
}

#[test]
fn normalization_at_paper_resolution() {
    let spec = CorrelationSpec::new(1.0, 8, 60.0, 4.0, 500).unwrap();
    assert!((normalization_diagnostic(&spec) - 1.0).abs() < 1e-4);
    let d = dense_covariance(&spec).unwrap();
    let diag = d[(0, 0)];
    assert!((0..500).all(|i| d[(i, i)] == diag));
    assert!((diag - normalization_diagnostic(&spec)).abs() < 1e-12);
}

#[test]
fn sample_statistics_at_size_64() {
    let spec = CorrelationSpec::new(2.0, 4, 3.0, 1.0, 64).unwrap();
    let exact = dense_covariance(&spec).unwrap();
    let sampler = Sampler::new(&spec);
    // Same stream as the acceptance sampling check for this spec.
    let mut rng = ChaCha8Rng::seed_from_u64(2024 + 4);
    let draws = 10_000;
    let mut acc = DMatrix::<f64>::zeros(64, 64);
    for _ in 0..draws {
        let x = DVector::from_vec(sampler.sample(&mut rng));
        acc += &x * x.transpose();
    }
    let cov = acc / draws as f64;
    assert!((&cov - &exact).norm() / exact.norm() < 0.05);
    for i in 0..64 {
        assert!((cov[(i, i)] / 2.0 - 1.0).abs() < 0.05, "variance at {i}: {}", cov[(i, i)]);
    }
    let lag1: f64 = (0..64).map(|i| cov[(i, (i + 1) % 64)]).sum::<f64>() / (0..64).map(|i| cov[(i, i)]).sum::<f64>();
    let implied = exact[(0, 1)] / exact[(0, 0)];
    assert!((lag1 - implied).abs() < 0.03, "{lag1} vs {implied}");
    assert!(sampler.colour(&[0.0; 64]).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn sample_is_reproducible_per_stream() {
    let spec = CorrelationSpec::new(1.0, 2, 2.0, 1.0, 40).unwrap();
    let a = sample(&spec, &mut ChaCha8Rng::seed_from_u64(9));
    let b = sample(&spec, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
}

fn spec_strategy(max_size: usize) -> impl Strategy<Value = CorrelationSpec> {
    (0.1f64..10.0, 1u32..=10, 0.5f64..12.0, 4usize..=max_size)
        .prop_map(|(s2, m, lt, n)| CorrelationSpec::new(s2, m, lt, 1.0, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_matches_dense_eigensolver(spec in spec_strategy(128)) {
        let n = spec.size;
        let ours = sorted_desc(covariance_spectrum(&spec).spectrum().iter().copied());
        let dense = sorted_desc(SymmetricEigen::new(dense_covariance(&spec).unwrap()).eigenvalues.iter().copied());
        // A dense eigensolver resolves eigenvalues to ε·λ_max; compare normwise.
        for (a, b) in ours.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-9 * ours[0]);
        }
        // Elementwise through the well-conditioned T: λ(C) = σ²νL̃·μ(T)^{−M}.
        let lt = spec.ltilde();
        let scale = spec.sigma2 * nu_oracle(spec.order) * lt;
        let via_t = sorted_desc(
            SymmetricEigen::new(dense_t(lt, n)).eigenvalues.iter().map(|mu| scale * mu.powi(-(spec.order as i32))),
        );
        for (a, b) in ours.iter().zip(&via_t) {
            prop_assert!((a / b - 1.0).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn spectrum_positive_symmetric_and_ordered(spec in spec_strategy(512)) {
        let op = covariance_spectrum(&spec);
        let (l, n) = (op.spectrum(), spec.size);
        prop_assert!(l.iter().all(|&x| x > 0.0));
        for i in 1..n {
            prop_assert_eq!(l[i], l[n - i]);
        }
        for i in 0..n / 2 {
            prop_assert!(l[i + 1] <= l[i]);
        }
        let st = op.stencil();
        for i in 1..n {
            prop_assert!((st[i] - st[n - i]).abs() <= 1e-14 * st[0]);
        }
    }

    #[test]
    fn apply_is_symmetric(spec in spec_strategy(256), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = (random_vec(&mut rng, spec.size), random_vec(&mut rng, spec.size));
        let (au, av) = (apply(&spec, &u).unwrap(), apply(&spec, &v).unwrap());
        let scale = covariance_spectrum(&spec).spectrum()[0] * spec.size as f64;
        prop_assert!((dot(&u, &av) - dot(&au, &v)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn circulant_from_spectrum_round_trips(n in 4usize..64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half: Vec<f64> = (0..=n / 2).map(|_| rng.random_range(0.1..5.0)).collect();
        let spectrum: Vec<f64> = (0..n).map(|i| half[i.min(n - i)]).collect();
        let op = CirculantOperator::from_spectrum(spectrum.clone());
        let back = CirculantOperator::from_stencil(op.stencil().to_vec());
        for (a, b) in back.spectrum().iter().zip(&spectrum) {
            prop_assert!((a - b).abs() < 1e-12 * 5.0);
        }
    }
}
