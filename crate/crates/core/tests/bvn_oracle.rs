mod common;

use common::{bvn_quad, phi};
use dualcv::bvn::{norm_cdf, norm_quantile};
use dualcv::{bvn_cdf, quadrant_probs, Correlation};
use proptest::prelude::*;

const RHOS: [f64; 7] = [-0.95, -0.5, 0.0, 0.3, 0.5, 0.8, 0.95];

fn grid() -> Vec<f64> {
    (0..9).map(|i| -3.0 + 0.75 * i as f64).collect()
}

#[test]
fn matches_quadrature_on_grid() {
    let mut worst = 0.0f64;
    for &h in &grid() {
        for &k in &grid() {
            for &r in &RHOS {
                let got = bvn_cdf(h, k, Correlation::new(r).unwrap()).unwrap();
                worst = worst.max((got - bvn_quad(h, k, r)).abs());
            }
        }
    }
    assert!(worst <= 1e-8, "max deviation {worst:e}");
}

#[test]
fn independence_factorizes() {
    for &h in &grid() {
        for &k in &grid() {
            let got = bvn_cdf(h, k, Correlation::new(0.0).unwrap()).unwrap();
            assert!((got - norm_cdf(h) * norm_cdf(k)).abs() < 1e-15);
        }
    }
}

#[test]
fn perfect_correlation_limits() {
    for &h in &grid() {
        for &k in &grid() {
            let up = bvn_cdf(h, k, Correlation::from_athrho(30.0).unwrap()).unwrap();
            assert!((up - norm_cdf(h.min(k))).abs() < 1e-7);
            let down = bvn_cdf(h, k, Correlation::from_athrho(-30.0).unwrap()).unwrap();
            assert!((down - (norm_cdf(h) + norm_cdf(k) - 1.0).max(0.0)).abs() < 1e-7);
        }
    }
}

#[test]
fn normal_cdf_matches_independent_erfc() {
    for i in 0..=160 {
        let x = -8.0 + 0.1 * i as f64;
        let (a, b) = (norm_cdf(x), phi(x));
        assert!((a - b).abs() <= 1e-10 * b.max(1e-300), "x={x}: {a} vs {b}");
    }
}

proptest! {
    #[test]
    fn quadrants_partition_unity(v1 in -8.0..8.0f64, v2 in -8.0..8.0f64, r in -0.999..0.999f64) {
        let q = quadrant_probs(v1, v2, Correlation::new(r).unwrap()).unwrap();
        prop_assert!((q.total() - 1.0).abs() <= 1e-12);
        for p in [q.p11, q.p10, q.p01, q.p00] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn symmetric_in_arguments(h in -5.0..5.0f64, k in -5.0..5.0f64, r in -0.99..0.99f64) {
        let rho = Correlation::new(r).unwrap();
        let a = bvn_cdf(h, k, rho).unwrap();
        let b = bvn_cdf(k, h, rho).unwrap();
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn monotone_in_rho(h in -3.0..3.0f64, k in -3.0..3.0f64, r in -0.9..0.89f64) {
        let lo = bvn_cdf(h, k, Correlation::new(r).unwrap()).unwrap();
        let hi = bvn_cdf(h, k, Correlation::new(r + 0.1).unwrap()).unwrap();
        prop_assert!(hi >= lo - 1e-15);
    }

    #[test]
    fn quantile_round_trip(p in 1e-12..(1.0 - 1e-12f64)) {
        let x = norm_quantile(p).unwrap();
        prop_assert!((norm_cdf(x) - p).abs() <= 1e-14 * p.max(1e-3));
    }
}
