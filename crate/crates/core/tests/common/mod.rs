//! Test-side oracles, independent of the library's numerics, and small
//! dataset builders.

#![allow(dead_code)]

use dualcv::data::VariableMeta;
use dualcv::{Dataset, SurveyRecord, VarKind};
use indexmap::IndexMap;

/// Standard normal CDF from statrs' erfc, a different implementation from
/// the one the library uses.
pub fn phi(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // Split into unit panels so narrow features are never stepped over.
    let panels = ((b - a).ceil() as usize).max(1);
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            let m = 0.5 * (lo + hi);
            let (flo, fhi, fm) = (f(lo), f(hi), f(m));
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
            simpson(f, lo, flo, hi, fhi, m, fm, whole, tol / panels as f64, 50)
        })
        .sum()
}

/// P(X ≤ h, Y ≤ k) for standard bivariate normal with correlation `rho`,
/// as `∫_{-∞}^{h} φ(x) Φ((k − ρx)/√(1 − ρ²)) dx`.
pub fn bvn_quad(h: f64, k: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let f = |x: f64| pdf(x) * phi((k - rho * x) / s);
    let (lo, hi) = (h.min(-1.0) - 12.0, h.min(12.0));
    // second pass with a tolerance relative to the first estimate
    let rough = integrate(&f, lo, hi, 1e-14);
    integrate(&f, lo, hi, (rough * 1e-12).max(1e-300))
}

/// Probability of the observed cell, `q1 = 2y1 − 1`, `q2 = 2y2 − 1`.
pub fn cell_quad(v1: f64, v2: f64, rho: f64, y1: bool, y2: bool) -> f64 {
    let q1 = if y1 { 1.0 } else { -1.0 };
    let q2 = if y2 { 1.0 } else { -1.0 };
    bvn_quad(q1 * v1, q2 * v2, q1 * q2 * rho)
}

pub fn meta(kinds: &[(&str, VarKind)]) -> IndexMap<String, VariableMeta> {
    kinds
        .iter()
        .map(|(n, k)| {
            (
                n.to_string(),
                VariableMeta {
                    kind: *k,
                    description: String::new(),
                },
            )
        })
        .collect()
}

pub fn record(id: usize, covariates: &[(&str, f64)], y1: bool, y2: bool) -> SurveyRecord {
    SurveyRecord {
        id: format!("r{id}"),
        bid_cash: 25.0,
        bid_labor: 1.0,
        y1,
        y2,
        max_wtp: None,
        max_wtc: None,
        covariates: covariates.iter().map(|(k, v)| (k.to_string(), Some(*v))).collect(),
        wage_slack: None,
        wage_peak: None,
        passthrough: IndexMap::new(),
    }
}

/// Covariate `x` and outcome `y1`.
pub fn univariate(xs: &[f64], ys: &[bool]) -> Dataset {
    let records = xs
        .iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (&x, &y))| record(i, &[("x", x)], y, false))
        .collect();
    Dataset::new(records, meta(&[("x", VarKind::Continuous)])).unwrap()
}

/// Independent probit log-likelihood.
pub fn probit_ll(x: &[Vec<f64>], y: &[bool], beta: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let v: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            if yi {
                phi(v).ln()
            } else {
                phi(-v).ln()
            }
        })
        .sum()
}
