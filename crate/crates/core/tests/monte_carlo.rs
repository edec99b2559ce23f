mod common;

use common::meta;
use dualcv::diagnostics::anchoring_test;
use dualcv::simulate::DgpConfig;
use dualcv::{generate_rep, monte_carlo, quadrant_probs, AnchorVehicle, Correlation, Dataset, ResponsePattern};

#[test]
fn joint_intervals_cover_the_truth() {
    let cfg = DgpConfig::compact(1500, 0.6, -0.9, 31).unwrap();
    let mc = monte_carlo(&cfg, 40, true).unwrap();
    assert_eq!(mc.joint_successes, 40);
    for p in &mc.joint {
        assert!(p.coverage >= 0.8, "{}: coverage {}", p.name, p.coverage);
        assert!(p.bias.abs() < 0.1 + 0.1 * p.truth.abs(), "{}: bias {}", p.name, p.bias);
    }
    let lr = mc.lr_rejection_rate.unwrap();
    assert!(lr > 0.9, "power of the LR test at rho = 0.6 is {lr}");
}

#[test]
fn cell_shares_match_model_probabilities() {
    let cfg = DgpConfig::compact(40_000, -0.5, 0.7, 12).unwrap();
    let ds = generate_rep(&cfg, 0).unwrap();
    let rho = Correlation::new(-0.5).unwrap();
    let mut expected = [0.0; 4];
    let mut observed = [0.0; 4];
    for r in ds.records() {
        let x1 = r.value("x1").unwrap();
        let x2 = r.value("x2").unwrap();
        let v1 = 1.8 - 0.04 * r.bid_cash + 0.5 * x1;
        // the labor equation's index depends on the realized y1
        let v2 = |y1: f64| 1.5 - 0.73 * r.bid_labor + 0.5 * x2 + 0.7 * y1;
        let on = quadrant_probs(v1, v2(1.0), rho).unwrap();
        let off = quadrant_probs(v1, v2(0.0), rho).unwrap();
        let cells = [on.p11, on.p10, off.p01, off.p00];
        for (e, c) in expected.iter_mut().zip(cells) {
            *e += c;
        }
        let k = ResponsePattern::ALL.iter().position(|&p| p == r.pattern()).unwrap();
        observed[k] += 1.0;
    }
    let n = ds.len() as f64;
    for (o, e) in observed.iter().zip(&expected) {
        assert!((o / n - e / n).abs() < 0.01, "{} vs {}", o / n, e / n);
    }
}

#[test]
fn anchoring_test_holds_its_size() {
    let cfg = DgpConfig::survey_like(194, 17);
    let reps = 60;
    let mut rejections = 0;
    for rep in 0..reps {
        let ds = generate_rep(&cfg, rep).unwrap();
        // the latent maxima do not depend on the assigned bid
        let t = anchoring_test(&ds, AnchorVehicle::Cash).unwrap();
        rejections += usize::from(t.omnibus.reject);
    }
    let keep = 1.0 - rejections as f64 / reps as f64;
    assert!(keep >= 0.9, "null kept in only {keep} of replications");
}

#[test]
fn generated_data_are_valid_datasets() {
    let cfg = DgpConfig::survey_like(50, 2);
    let ds = generate_rep(&cfg, 3).unwrap();
    let kinds: Vec<(String, dualcv::VarKind)> =
        ds.covariate_meta().into_iter().map(|(n, m)| (n, m.kind)).collect();
    let refs: Vec<(&str, dualcv::VarKind)> = kinds.iter().map(|(n, k)| (n.as_str(), *k)).collect();
    let rebuilt = Dataset::new(ds.records().to_vec(), meta(&refs)).unwrap();
    assert_eq!(rebuilt.len(), 50);
}
