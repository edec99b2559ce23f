mod common;

use common::{cell_quad, meta, record};
use dualcv::biprobit::{biprobit_loglik, ATHRHO_BOUND};
use dualcv::simulate::DgpConfig;
use dualcv::{
    fit_recursive, generate, lr_test_rho, BiprobitOptions, BiprobitSpec, Dataset, ModelSpec,
    VarKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn toy_spec() -> BiprobitSpec {
    BiprobitSpec {
        eq1: ModelSpec::new("y1", &["x1"]),
        eq2: ModelSpec::new("y2", &["x2", "y1"]).with_endogenous("y1"),
    }
}

/// `n` records from the recursive DGP with standard normal covariates.
fn toy_data(n: usize, rho: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (1.0 - rho * rho).sqrt();
    let records = (0..n)
        .map(|i| {
            let x1: f64 = rng.sample(StandardNormal);
            let x2: f64 = rng.sample(StandardNormal);
            let e1: f64 = rng.sample(StandardNormal);
            let xi: f64 = rng.sample(StandardNormal);
            let e2 = rho * e1 + s * xi;
            let y1 = 0.3 + 0.8 * x1 + e1 > 0.0;
            let y2 = -0.2 + 0.7 * x2 - 0.6 * f64::from(u8::from(y1)) + e2 > 0.0;
            record(i, &[("x1", x1), ("x2", x2)], y1, y2)
        })
        .collect();
    Dataset::new(
        records,
        meta(&[("x1", VarKind::Continuous), ("x2", VarKind::Continuous)]),
    )
    .unwrap()
}

fn oracle_loglik(ds: &Dataset, theta: &[f64]) -> f64 {
    let rho = theta[5].tanh();
    ds.records()
        .iter()
        .map(|r| {
            let x1 = r.value("x1").unwrap();
            let x2 = r.value("x2").unwrap();
            let y1 = f64::from(u8::from(r.y1));
            let v1 = theta[0] + theta[1] * x1;
            let v2 = theta[2] + theta[3] * x2 + theta[4] * y1;
            cell_quad(v1, v2, rho, r.y1, r.y2).ln()
        })
        .sum()
}

#[test]
fn loglik_matches_quadrature() {
    let ds = toy_data(25, 0.5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (ll, _) = biprobit_loglik(&toy_spec(), &ds, &theta).unwrap();
        let want = oracle_loglik(&ds, &theta);
        assert!((ll - want).abs() <= 1e-8 * want.abs(), "{ll} vs {want}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let ds = toy_data(40, 0.4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (_, g) = biprobit_loglik(&toy_spec(), &ds, &theta).unwrap();
        for j in 0..6 {
            let h = 1e-6;
            let mut up = theta.clone();
            up[j] += h;
            let mut down = theta.clone();
            down[j] -= h;
            let fd = (biprobit_loglik(&toy_spec(), &ds, &up).unwrap().0
                - biprobit_loglik(&toy_spec(), &ds, &down).unwrap().0)
                / (2.0 * h);
            assert!((g[j] - fd).abs() <= 1e-5 * g[j].abs().max(1.0), "param {j}: {} vs {fd}", g[j]);
        }
    }
}

#[test]
fn joint_nests_independent_fits() {
    let opts = BiprobitOptions::default();
    let mut checked = 0;
    for seed in 0..50u64 {
        let rho = -0.8 + 1.6 * (seed as f64 / 49.0);
        let ds = toy_data(60, rho, 100 + seed);
        let Ok(fit) = fit_recursive(&toy_spec(), &ds, &opts) else {
            continue;
        };
        checked += 1;
        let restricted = fit.eq1.loglik + fit.eq2.loglik;
        assert!(
            fit.joint.loglik >= restricted - 1e-6,
            "seed {seed}: {} < {restricted}",
            fit.joint.loglik
        );
        let lr = lr_test_rho(&fit.joint, &fit.eq1, &fit.eq2).unwrap();
        assert!(lr.statistic.unwrap() >= 0.0);
    }
    assert!(checked >= 45, "only {checked} datasets could be fitted");
}

#[test]
fn ten_record_fit_beats_random_search() {
    let rows = [
        (-1.2, 0.4, false, true),
        (-0.7, -1.1, true, false),
        (-0.3, 0.9, false, false),
        (0.1, -0.2, true, true),
        (0.4, 1.3, false, true),
        (0.6, -0.8, true, false),
        (0.9, 0.2, true, true),
        (1.3, -1.4, false, false),
        (-0.1, 0.6, true, false),
        (1.7, 0.0, true, true),
    ];
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(x1, x2, y1, y2))| record(i, &[("x1", x1), ("x2", x2)], y1, y2))
        .collect();
    let ds = Dataset::new(
        records,
        meta(&[("x1", VarKind::Continuous), ("x2", VarKind::Continuous)]),
    )
    .unwrap();
    let fit = fit_recursive(&toy_spec(), &ds, &BiprobitOptions::default())
        .unwrap()
        .joint;
    let theta: Vec<f64> = fit.params().iter().copied().collect();
    let best = fit.loglik;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for i in 0..20_000 {
        let radius = if i % 2 == 0 { 0.05 } else { 1.0 };
        let mut cand: Vec<f64> = theta
            .iter()
            .map(|t| t + radius * rng.random_range(-1.0..1.0))
            .collect();
        cand[5] = cand[5].clamp(-ATHRHO_BOUND, ATHRHO_BOUND);
        let (ll, _) = biprobit_loglik(&toy_spec(), &ds, &cand).unwrap();
        assert!(ll <= best + 1e-7, "found {ll} above the optimum {best}");
    }
}

#[test]
fn boundary_fit_is_graceful() {
    let cfg = DgpConfig::survey_like(194, 7);
    let ds = dualcv::generate_rep(&cfg, 1).unwrap();
    let fit = fit_recursive(&cfg.spec(), &ds, &BiprobitOptions::default()).unwrap();
    let j = &fit.joint;
    assert!(j.converged);
    assert!(j.loglik.is_finite());
    assert_eq!(j.rho, j.athrho.tanh());
    if j.rho.abs() > 0.999 {
        assert!(j.boundary_warning);
        assert!(j.rho_se().is_none());
    }
}

#[test]
fn recovers_parameters_on_large_sample() {
    let cfg = DgpConfig::compact(20_000, 0.5, -0.8, 9).unwrap();
    let ds = generate(&cfg).unwrap();
    let fit = fit_recursive(&cfg.spec(), &ds, &BiprobitOptions::default()).unwrap();
    let (names, truth) = cfg.truth();
    let est = fit.joint.params();
    for (k, name) in names.iter().enumerate() {
        let se = fit.joint.vcov[(k, k)].sqrt();
        assert!((est[k] - truth[k]).abs() < 4.0 * se, "{name}: {} vs {}", est[k], truth[k]);
    }
}
