//! Distributional checks of generated and refined Brownian paths.

use proptest::prelude::*;
use sao_core::paths::BrownianPath;
use sao_core::stats::{ks_statistic, Cdf};

#[test]
fn increments_are_standard_gaussian() {
    let dt = 0.01;
    let path = BrownianPath::generate(0.0, 100.0, dt, 12).unwrap();
    let v = path.values();
    let z: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]) / dt.sqrt()).collect();
    assert_eq!(z.len(), 10_000);
    let var = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
    assert!((0.9..=1.1).contains(&var), "{var}");
    let ks = ks_statistic(&z, Cdf::Normal01);
    assert!(ks.p_value > 0.001, "{ks:?}");
}

#[test]
fn bridge_midpoints_have_quarter_variance() {
    let dt = 0.02;
    let mut path = BrownianPath::generate(0.0, 200.0, dt, 99).unwrap();
    let coarse = path.values();
    path.refine(0.0, 200.0, dt / 2.0).unwrap();
    let fine = path.values();
    let dev: Vec<f64> = (0..coarse.len() - 1).map(|i| fine[2 * i + 1] - 0.5 * (coarse[i] + coarse[i + 1])).collect();
    assert_eq!(dev.len(), 10_000);
    let var = dev.iter().map(|x| x * x).sum::<f64>() / dev.len() as f64;
    assert!((var / (dt / 4.0) - 1.0).abs() < 0.05, "{var}");
    let z: Vec<f64> = dev.iter().map(|x| x / (dt / 4.0).sqrt()).collect();
    assert!(ks_statistic(&z, Cdf::Normal01).p_value > 0.001);
}

#[test]
fn endpoint_mean_obeys_the_clt() {
    let (t0, t1) = (0.0, 4.0);
    let mean = (0..10_000u64)
        .map(|s| *BrownianPath::generate(t0, t1, 0.5, s).unwrap().values().last().unwrap())
        .sum::<f64>()
        / 1e4;
    assert!(mean.abs() <= 4.0 * (t1 - t0).sqrt() / 100.0, "{mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn increments_are_additive(seed in any::<u64>(), i in 0usize..100, j in 0usize..100, k in 0usize..100) {
        let path = BrownianPath::generate(0.0, 1.0, 0.01, seed).unwrap();
        let mut idx = [i, j, k];
        idx.sort_unstable();
        let t = idx.map(|n| n as f64 * 0.01);
        let lhs = path.increment(t[0], t[2]).unwrap();
        let rhs = path.increment(t[0], t[1]).unwrap() + path.increment(t[1], t[2]).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        prop_assert_eq!(path.increment(t[1], t[1]).unwrap(), 0.0);
    }

    #[test]
    fn refinement_preserves_existing_values(seed in any::<u64>(), lo in 0usize..50, len in 1usize..50, depth in 1u32..4) {
        let mut path = BrownianPath::generate(0.0, 1.0, 0.01, seed).unwrap();
        let before: Vec<(f64, f64)> = path.grid().into_iter().zip(path.values()).collect();
        let (a, b) = (lo as f64 * 0.01, ((lo + len).min(100)) as f64 * 0.01);
        path.refine(a, b, 0.01 / f64::from(1u32 << depth)).unwrap();
        for (t, v) in before {
            prop_assert_eq!(path.value_at(t).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn refinement_order_is_immaterial(seed in any::<u64>()) {
        let mut p = BrownianPath::generate(0.0, 2.0, 0.25, seed).unwrap();
        let mut q = p.clone();
        p.refine(0.0, 1.0, 0.0625).unwrap();
        p.refine(1.0, 2.0, 0.0625).unwrap();
        q.refine(1.0, 2.0, 0.125).unwrap();
        q.refine(0.0, 2.0, 0.0625).unwrap();
        prop_assert_eq!(p.values(), q.values());
    }
}
