mod common;

use common::{phi, probit_ll, univariate};
use dualcv::probit::probit_loglik;
use dualcv::{fit_probit, ModelSpec, ProbitOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const X8: [f64; 8] = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];
const Y8: [bool; 8] = [false, false, true, false, true, false, true, true];

fn spec() -> ModelSpec {
    ModelSpec::new("y1", &["x"])
}

/// Maximizes the oracle log-likelihood by repeatedly refining a 2-D grid
/// around the best point.
fn grid_search(xs: &[f64], ys: &[bool]) -> [f64; 2] {
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
    let mut center = [0.0, 0.0];
    let mut half = 4.0;
    while half > 1e-6 {
        let mut best = (f64::NEG_INFINITY, center);
        for i in 0..=40 {
            for j in 0..=40 {
                let b = [
                    center[0] - half + half * i as f64 / 20.0,
                    center[1] - half + half * j as f64 / 20.0,
                ];
                let ll = probit_ll(&rows, ys, &b);
                if ll > best.0 {
                    best = (ll, b);
                }
            }
        }
        center = best.1;
        half /= 5.0;
    }
    center
}

#[test]
fn eight_record_fixture_matches_grid_search() {
    let ds = univariate(&X8, &Y8);
    let fit = fit_probit(&spec(), &ds, &ProbitOptions::default()).unwrap();
    assert!(fit.converged);
    let oracle = grid_search(&X8, &Y8);
    for (got, want) in fit.coefficients.iter().zip(oracle) {
        assert!((got - want).abs() <= 1e-3, "{got} vs {want}");
    }
}

#[test]
fn intercept_only_recovers_probit_of_mean() {
    let ys: Vec<bool> = (0..37).map(|i| i % 3 != 0).collect();
    let xs = vec![0.0; ys.len()];
    let ds = univariate(&xs, &ys);
    let fit = fit_probit(&ModelSpec::new("y1", &[]), &ds, &ProbitOptions::default()).unwrap();
    let ybar = ys.iter().filter(|&&y| y).count() as f64 / ys.len() as f64;
    // Invert the oracle CDF by bisection.
    let (mut lo, mut hi) = (-5.0, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < ybar {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((fit.coefficients[0] - lo).abs() <= 1e-8);
}

#[test]
fn loglik_matches_oracle() {
    let ds = univariate(&X8, &Y8);
    let rows: Vec<Vec<f64>> = X8.iter().map(|&x| vec![1.0, x]).collect();
    for b in [[0.0, 0.0], [0.3, -0.7], [-1.2, 2.5]] {
        let (ll, _) = probit_loglik(&spec(), &ds, &b).unwrap();
        assert!((ll - probit_ll(&rows, &Y8, &b)).abs() < 1e-9);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ds = univariate(&X8, &Y8);
    for _ in 0..20 {
        let b = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let (_, g) = probit_loglik(&spec(), &ds, &b).unwrap();
        for j in 0..2 {
            let h = 1e-6;
            let mut up = b;
            up[j] += h;
            let mut down = b;
            down[j] -= h;
            let fd = (probit_loglik(&spec(), &ds, &up).unwrap().0
                - probit_loglik(&spec(), &ds, &down).unwrap().0)
                / (2.0 * h);
            assert!((g[j] - fd).abs() <= 1e-6 * g[j].abs().max(1.0), "{} vs {fd}", g[j]);
        }
    }
}

fn sample(seed: u64, n: usize) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let ys = xs
        .iter()
        .map(|x| {
            let e: f64 = rng.sample(StandardNormal);
            0.2 + 0.8 * x + e > 0.0
        })
        .collect();
    (xs, ys)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn affine_equivariance(seed in 0u64..10_000, scale in 0.2..5.0f64, shift in -3.0..3.0f64) {
        let (xs, ys) = sample(seed, 80);
        let opts = ProbitOptions::default();
        let base = fit_probit(&spec(), &univariate(&xs, &ys), &opts).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let fit = fit_probit(&spec(), &univariate(&moved, &ys), &opts).unwrap();
        let slope = base.coefficients[1] / scale;
        prop_assert!((fit.coefficients[1] - slope).abs() <= 1e-6 * slope.abs().max(1.0));
        let icpt = base.coefficients[0] - slope * shift;
        prop_assert!((fit.coefficients[0] - icpt).abs() <= 1e-6 * icpt.abs().max(1.0));
        prop_assert!((fit.loglik - base.loglik).abs() <= 1e-8 * base.loglik.abs());
    }

    #[test]
    fn relabeling_negates(seed in 0u64..10_000) {
        let (xs, ys) = sample(seed, 80);
        let flipped: Vec<bool> = ys.iter().map(|y| !y).collect();
        let opts = ProbitOptions::default();
        let a = fit_probit(&spec(), &univariate(&xs, &ys), &opts).unwrap();
        let b = fit_probit(&spec(), &univariate(&xs, &flipped), &opts).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((u + v).abs() <= 1e-7);
        }
    }
}
