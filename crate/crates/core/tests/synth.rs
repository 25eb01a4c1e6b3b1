mod common;

use nalgebra::{DMatrix, DVector};
use ufw::synth::{empirical_trend_snr, gen_matrix_instance, gen_trend_instance, MatrixGenSpec, TrendGenSpec};
use ufw::trendfilter::apply_d;

use common::nuclear_norm_dense;

fn matrix_spec(m: usize, n: usize, r: usize, r1: usize, nnzr: f64, seed: u64) -> MatrixGenSpec {
    MatrixGenSpec {
        m,
        n,
        r,
        r1,
        snr: 5.0,
        nnzr,
        delta_rel: 0.5,
        seed,
    }
}

#[test]
fn trend_snr_matches_the_request() {
    for (seed, snr) in [(1, 1.0), (2, 1.0), (3, 4.0)] {
        let inst = gen_trend_instance(&TrendGenSpec::new(1000, 500, 1, snr, seed)).unwrap();
        let got = empirical_trend_snr(&inst);
        assert!((got / snr - 1.0).abs() < 0.15, "seed {seed}: snr {got} vs {snr}");
    }
}

#[test]
fn trend_truth_sits_on_the_boundary() {
    for r in 1..=2 {
        let inst = gen_trend_instance(&TrendGenSpec::new(30, 40, r, 1.0, 9)).unwrap();
        let tv: f64 = apply_d(r, &inst.x_star).unwrap().iter().map(|v| v.abs()).sum();
        assert!((tv - inst.delta).abs() < 1e-12, "r={r} tv={tv}");
        assert_eq!(inst.a.shape(), (30, 40));
    }
}

#[test]
fn noiseless_trend_has_zero_residual_at_the_truth() {
    let inst = gen_trend_instance(&TrendGenSpec::new(30, 20, 1, f64::INFINITY, 5)).unwrap();
    let r = &inst.a * DVector::from_column_slice(&inst.x_star) - &inst.b;
    assert_eq!(r.amax(), 0.0);
}

#[test]
fn side_information_is_orthonormal() {
    for (m, r1) in [(20, 1), (30, 5), (12, 11)] {
        let inst = gen_matrix_instance(&matrix_spec(m, 10, 2, r1.min(10), 0.5, 3)).unwrap();
        let p1 = &inst.p1;
        let gram = p1.tr_mul(p1);
        assert!((gram - DMatrix::<f64>::identity(p1.ncols(), p1.ncols())).amax() < 1e-13);
    }
}

#[test]
fn delta_matches_a_dense_nuclear_norm() {
    for seed in 1..=4 {
        let spec = matrix_spec(25, 18, 3, 2, 0.4, seed);
        let inst = gen_matrix_instance(&spec).unwrap();
        // (I − P₁P₁ᵀ) removes the side-information part of the truth.
        let p1 = &inst.p1;
        let complement = DMatrix::<f64>::identity(25, 25) - p1 * p1.transpose();
        let projected = &complement * &inst.ground_truth;
        let want = spec.delta_rel * nuclear_norm_dense(&projected);
        assert!((inst.delta - want).abs() <= 1e-8 * want.max(1.0), "{} vs {want}", inst.delta);
    }
}

#[test]
fn observation_pattern_is_distinct_and_sized() {
    let inst = gen_matrix_instance(&matrix_spec(17, 13, 2, 2, 0.37, 6)).unwrap();
    assert_eq!(inst.omega.len(), inst.spec.observed_count());
    assert!(inst.omega.windows(2).all(|w| w[0] < w[1]));
    assert!(inst.omega.iter().all(|&(i, j)| i < 17 && j < 13));

    let full = gen_matrix_instance(&matrix_spec(7, 6, 1, 1, 1.0, 6)).unwrap();
    let all: Vec<(usize, usize)> = (0..7).flat_map(|i| (0..6).map(move |j| (i, j))).collect();
    assert_eq!(full.omega, all);
}

#[test]
fn generators_are_pure_functions_of_the_spec() {
    let t = TrendGenSpec::new(40, 30, 2, 2.0, 11);
    let (a, b) = (gen_trend_instance(&t).unwrap(), gen_trend_instance(&t).unwrap());
    assert_eq!(a.a, b.a);
    assert_eq!(a.b, b.b);
    assert_eq!(a.x_star, b.x_star);

    let s = matrix_spec(15, 12, 2, 3, 0.6, 11);
    let (a, b) = (gen_matrix_instance(&s).unwrap(), gen_matrix_instance(&s).unwrap());
    assert_eq!(a.omega, b.omega);
    assert_eq!(a.observed, b.observed);
    assert_eq!(a.p1, b.p1);
    assert_eq!(a.delta, b.delta);

    let c = gen_matrix_instance(&MatrixGenSpec { seed: 12, ..s }).unwrap();
    assert_ne!(a.observed, c.observed);
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(gen_trend_instance(&TrendGenSpec::new(10, 10, 3, 1.0, 0)).is_err());
    assert!(gen_trend_instance(&TrendGenSpec::new(10, 10, 1, 0.0, 0)).is_err());
    assert!(gen_matrix_instance(&matrix_spec(5, 5, 1, 5, 0.5, 0)).is_err());
    assert!(gen_matrix_instance(&matrix_spec(5, 5, 1, 1, 0.0, 0)).is_err());
    assert!(gen_matrix_instance(&matrix_spec(5, 5, 6, 1, 0.5, 0)).is_err());
}
