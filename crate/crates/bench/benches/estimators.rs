use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dualcv::simulate::DgpConfig;
use dualcv::{bvn_cdf, fit_probit, fit_recursive, generate, BiprobitOptions, Correlation, ProbitOptions};

fn bvn(c: &mut Criterion) {
    let grid: Vec<f64> = (0..9).map(|i| -3.0 + 0.75 * i as f64).collect();
    let rhos: Vec<Correlation> = [-0.95, -0.5, 0.0, 0.3, 0.5, 0.8, 0.95]
        .iter()
        .map(|&r| Correlation::new(r).unwrap())
        .collect();
    c.bench_function("bvn_cdf grid (567 points)", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for &h in &grid {
                for &k in &grid {
                    for &r in &rhos {
                        s += bvn_cdf(black_box(h), black_box(k), r).unwrap();
                    }
                }
            }
            s
        })
    });
}

fn estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(20);
    for n in [194usize, 1000, 5000] {
        let cfg = DgpConfig::survey_like(n, 1);
        let ds = generate(&cfg).unwrap();
        let spec = cfg.spec();
        group.bench_with_input(BenchmarkId::new("probit", n), &ds, |b, ds| {
            b.iter(|| fit_probit(&spec.eq1, ds, &ProbitOptions::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("recursive_biprobit", n), &ds, |b, ds| {
            b.iter(|| fit_recursive(&spec, ds, &BiprobitOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = DgpConfig::survey_like(5000, 3);
    c.bench_function("generate survey_like n=5000", |b| b.iter(|| generate(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, bvn, estimators, simulation);
criterion_main!(benches);
