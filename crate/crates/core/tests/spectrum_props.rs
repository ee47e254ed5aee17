//! Spectral invariants on noisy paths and agreement with the finite-difference
//! discretization driven by the same noise.

use proptest::prelude::*;
use sao_core::discrete_oracle::{self, NoiseQuadrature};
use sao_core::paths::BrownianPath;
use sao_core::riccati::{integrate_forward, projective_distance, DriftSpec};
use sao_core::spectrum::{
    eigenvalue_bisect, eigenvalue_count, eigenvalues, extract_crossing, localization_center,
    reconstruct_eigenfunction,
};

const TOL: f64 = 1e-10;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn counts_bracket_each_eigenvalue(seed in any::<u64>(), beta in 0.05f64..0.3) {
        let path = BrownianPath::generate(0.0, 30.0, 1e-2, seed).unwrap();
        let lambdas = eigenvalues(&path, beta, 30.0, 3, TOL).unwrap();
        prop_assert!(lambdas.windows(2).all(|w| w[0] < w[1]));
        let d = 1e-6;
        for (k, &l) in lambdas.iter().enumerate() {
            prop_assert_eq!(eigenvalue_count(&path, beta, 30.0, -(l + d)).unwrap(), k + 1);
            prop_assert_eq!(eigenvalue_count(&path, beta, 30.0, -(l - d)).unwrap(), k);
        }
    }

    #[test]
    fn eigenvalues_decrease_with_the_domain(seed in any::<u64>()) {
        let path = BrownianPath::generate(0.0, 40.0, 1e-2, seed).unwrap();
        let mut last = [f64::INFINITY; 2];
        for t_max in [10.0, 20.0, 30.0, 40.0] {
            let l = eigenvalues(&path, 0.1, t_max, 2, TOL).unwrap();
            for k in 0..2 {
                prop_assert!(l[k] <= last[k] + 1e-9, "T = {}: {} > {}", t_max, l[k], last[k]);
                last[k] = l[k];
            }
        }
    }

    #[test]
    fn crossing_times_are_ordered(seed in any::<u64>()) {
        let path = BrownianPath::generate(0.0, 200.0, 1e-2, seed).unwrap();
        let tr = integrate_forward(&path, &DriftSpec::forward(1.0, 0.0), 0.0, f64::INFINITY, 200.0, 1e-8).unwrap();
        if let Ok(c) = extract_crossing(&tr, 1.0) {
            let e = c.event;
            prop_assert!(e.iota < e.upsilon && e.upsilon < e.theta, "{:?}", e);
            if let Some(z) = e.zeta {
                prop_assert!(e.theta <= z);
            }
        }
    }
}

#[test]
fn eigenfunctions_on_noisy_paths() {
    let (beta, t_max) = (0.2, 40.0);
    for seed in 0..6u64 {
        let path = BrownianPath::generate(0.0, t_max, 1e-2, 40 + seed).unwrap();
        for k in 1..=3 {
            let l = eigenvalue_bisect(&path, beta, t_max, k, TOL).unwrap();
            let ef = reconstruct_eigenfunction(&path, beta, t_max, l, 1e-6).unwrap();
            let norm: f64 = ef
                .t
                .windows(2)
                .zip(ef.phi.windows(2))
                .map(|(t, p)| 0.5 * (t[1] - t[0]) * (p[0] * p[0] + p[1] * p[1]))
                .sum();
            assert!((norm - 1.0).abs() < 1e-6);
            assert_eq!(ef.sign_changes(), k - 1, "seed {seed}, k = {k}");
            assert_eq!(ef.center, localization_center(&ef.t, &ef.phi));

            // The explosions of χ are the zeros of φ.
            let zeros: Vec<f64> = ef.forward.explosions.iter().copied().filter(|&z| z < ef.stitch).collect();
            for z in zeros {
                let i = ef.t.partition_point(|&t| t < z);
                assert!(ef.phi[i - 1] * ef.phi[i.min(ef.t.len() - 1)] <= 0.0, "zero at {z}");
            }

            // Z and Ẑ agree in the bulk of φ.
            let peak = ef.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let support: Vec<usize> = (0..ef.t.len()).filter(|&i| ef.phi[i].abs() >= 1e-3 * peak).collect();
            let (lo, hi) = (support[0], support[support.len() - 1]);
            let third = (hi - lo) / 3;
            let worst = (lo + third..=hi - third)
                .map(|i| projective_distance(ef.forward.samples[i].z, ef.backward.samples[i].z))
                .fold(0.0, f64::max);
            assert!(worst <= 1e-5, "seed {seed}, k = {k}: {worst}");
        }
    }
}

#[test]
fn high_levels_have_no_eigenvalues() {
    for seed in 0..10u64 {
        let path = BrownianPath::generate(0.0, 20.0, 1e-2, seed).unwrap();
        assert_eq!(eigenvalue_count(&path, 0.1, 20.0, 15.0).unwrap(), 0);
        let op = discrete_oracle::build(&path, 0.1, 20.0, 1999).unwrap();
        assert_eq!(discrete_oracle::sturm_count(&op, 15.0), 0);
    }
}

#[test]
fn counts_match_the_tridiagonal_oracle() {
    let (t_max, dt, tol) = (20.0, 1e-2, 1e-8);
    let n = (t_max / dt) as usize - 1;
    let (mut agree, mut total) = (0, 0);
    for seed in 0..25u64 {
        let path = BrownianPath::generate(0.0, t_max, dt, 900 + seed).unwrap();
        let op = discrete_oracle::build_with(&path, 0.0, t_max, n, NoiseQuadrature::SecondOrder).unwrap();
        let fd = discrete_oracle::eigenvalues(&op, 4, 1e-10).unwrap();
        let ric = eigenvalues(&path, 0.0, t_max, 4, 1e-10).unwrap();
        for (x, y) in fd.iter().zip(&ric) {
            assert!((x - y).abs() < 0.05, "seed {seed}: {x} vs {y}");
        }
        let sep = 5.0 * (dt + tol);
        for j in 0..40 {
            let a = -2.5 + 0.1 * j as f64;
            if fd.iter().chain(&ric).any(|l| (l + a).abs() < sep) {
                continue;
            }
            total += 1;
            if discrete_oracle::sturm_count(&op, a) == eigenvalue_count(&path, 0.0, t_max, a).unwrap() {
                agree += 1;
            }
        }
    }
    assert!(total > 200);
    assert!(agree as f64 >= 0.95 * total as f64, "{agree}/{total}");
}

#[test]
fn oracle_noise_has_white_noise_scaling() {
    // the path resolves the half-cell window edges exactly
    let (t_max, n) = (100.0, 9999);
    let path = BrownianPath::generate(0.0, t_max, 5e-3, 4).unwrap();
    let op = discrete_oracle::build(&path, 0.0, t_max, n).unwrap();
    let mean = op.potential.iter().sum::<f64>() / n as f64;
    let var = op.potential.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let ratio = var * op.dx;
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");
    assert_eq!(op, discrete_oracle::build(&path, 0.0, t_max, n).unwrap());
}

#[test]
fn oracle_error_is_second_order() {
    let quiet = BrownianPath::zero(0.0, 1.0, 1e-4).unwrap();
    let err = |n: usize| {
        let op = discrete_oracle::build(&quiet, 0.0, 1.0, n).unwrap();
        (discrete_oracle::eigenvalues(&op, 1, 1e-12).unwrap()[0] - std::f64::consts::PI.powi(2)).abs()
    };
    let ratio = err(499) / err(999);
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}
