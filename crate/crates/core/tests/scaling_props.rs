//! Scaling functions against a Monte Carlo oracle and their structural laws.

use proptest::prelude::*;
use sao_core::paths::{key_hash, BrownianPath};
use sao_core::riccati::ForwardRunner;
use sao_core::scaling::{self, a_l_inverse, convert_conventions, invert_conventions, m, ScalingParams};

/// First explosion time of the homogeneous diffusion started at `+∞`,
/// simulated over consecutive windows of a fresh path.
fn first_explosion(a: f64, seed: u64) -> f64 {
    let (window, dt) = (50.0, 1e-2);
    let mut runner = ForwardRunner::from_infinity(a, 0.0);
    let mut out = Vec::new();
    for w in 0u64.. {
        let t0 = w as f64 * window;
        let path = BrownianPath::generate(t0, t0 + window, dt, key_hash(&[seed, w])).unwrap();
        runner.advance(&path, &mut out, Some(1)).unwrap();
        if let Some(&t) = out.first() {
            return t;
        }
    }
    unreachable!()
}

#[test]
fn mean_explosion_time_matches_simulation() {
    let a = 1.0;
    let n = 2000;
    let g: Vec<f64> = (0..n).map(|i| first_explosion(a, 31 + i)).collect();
    let mean = g.iter().sum::<f64>() / n as f64;
    let sd = (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let half = 1.96 * sd / (n as f64).sqrt();
    let want = m(a).unwrap();
    assert!((mean - want).abs() <= half, "simulated {mean} ± {half}, quadrature {want}");
}

#[test]
fn m_is_strictly_increasing() {
    let vals: Vec<f64> = (0..50).map(|i| m(0.5 + 3.5 * i as f64 / 49.0).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[0] < w[1]));
    assert!(m(1.0).unwrap() < m(1.5).unwrap() && m(1.5).unwrap() < m(2.0).unwrap());
    let want = std::f64::consts::FRAC_PI_2 * (64.0f64 / 3.0).exp();
    assert!((m(4.0).unwrap() / want - 1.0).abs() < 0.1);
}

#[test]
fn length_scale_and_params_agree() {
    for beta in [0.01, 0.05, 0.1, 0.3] {
        let p = ScalingParams::from_beta(beta).unwrap();
        let l = 1.0 / (beta * (0.375 * (1.0 / beta).ln()).cbrt());
        assert!((p.l - l).abs() < 1e-12 * l);
        assert_eq!(p.l, scaling::length_scale(beta).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inverse_undoes_m(a in 0.8f64..3.0) {
        prop_assert!((a_l_inverse(m(a).unwrap()).unwrap() - a).abs() < 1e-6);
    }

    #[test]
    fn rescaling_is_affine(beta in 0.01f64..0.3, x in -5.0f64..5.0, y in -3.0f64..3.0, d in 1e-3f64..1.0) {
        let p = ScalingParams::from_beta(beta).unwrap();
        let lhs = p.rescale_eigenvalue(x + y * d) - p.rescale_eigenvalue(x);
        prop_assert!((lhs - 4.0 * p.a_l.sqrt() * y * d).abs() < 1e-10);
    }

    #[test]
    fn conventions_round_trip(beta in 0.01f64..8.0, mu in -20.0f64..20.0, x in 0.0f64..50.0) {
        let c = convert_conventions(mu, x, beta).unwrap();
        let (mu2, x2) = invert_conventions(c.lambda, c.phi_time, beta).unwrap();
        prop_assert!((mu2 - mu).abs() < 1e-12 * mu.abs().max(1.0));
        prop_assert!((x2 - x).abs() < 1e-12 * x.abs().max(1.0));
    }
}
