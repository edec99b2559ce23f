use dualcv::simulate::DgpConfig;
use dualcv::welfare::summary_means;
use dualcv::{
    cv_labor, cv_money, cv_total, fit_recursive, generate, labor_value, shadow_wage,
    welfare_report, welfare_table, BiprobitOptions, WageMode, WelfareOptions,
};
use proptest::prelude::*;

#[test]
fn published_wage_and_labor_figures() {
    let sw = shadow_wage(13.55, 17.71, 0.3863).unwrap();
    assert!((sw.lower - 5.23).abs() <= 0.01);
    assert!((sw.upper - 6.84).abs() <= 0.01);
    assert!((labor_value(28.77, 5.23) - 150.46).abs() <= 0.05);
    assert!((labor_value(28.77, 6.84) - 196.76).abs() <= 0.05);
    let total = 57.37 + 177.82;
    assert!((total - 235.19f64).abs() <= 0.01);
    assert!((57.37 / total - 0.2439).abs() <= 0.001);
}

#[test]
fn shadow_wage_rejects_bad_inputs() {
    assert!(shadow_wage(10.0, 12.0, 0.0).is_err());
    assert!(shadow_wage(10.0, 12.0, 1.5).is_err());
    assert!(shadow_wage(-1.0, 12.0, 0.5).is_err());
    assert!(shadow_wage(14.0, 12.0, 0.5).is_err());
}

proptest! {
    #[test]
    fn total_is_money_plus_average_labor(
        cv_m in -100.0..500.0f64,
        days in 0.0..10.0f64,
        slack in 1.0..30.0f64,
        gap in 0.0..20.0f64,
        ratio in 0.05..1.0f64,
    ) {
        let sw = shadow_wage(slack, slack + gap, ratio).unwrap();
        let t = cv_total(cv_m, days, &sw);
        prop_assert!((t.total - (cv_m + 12.0 * days * sw.mean_w)).abs() <= 1e-9 * t.total.abs().max(1.0));
        prop_assert!(t.labor_value_slack <= t.labor_value + 1e-12);
        prop_assert!(t.labor_value <= t.labor_value_peak + 1e-12);
        prop_assert!((t.labor_value - 0.5 * (t.labor_value_slack + t.labor_value_peak)).abs() <= 1e-9 * t.labor_value.max(1.0));
    }

    #[test]
    fn shadow_wage_is_linear_in_ratio(slack in 1.0..30.0f64, gap in 0.0..20.0f64, ratio in 0.05..1.0f64) {
        let a = shadow_wage(slack, slack + gap, ratio).unwrap();
        let b = shadow_wage(slack, slack + gap, 1.0).unwrap();
        prop_assert!((a.lower - ratio * b.lower).abs() <= 1e-12 * b.lower);
        prop_assert!((a.upper - ratio * b.upper).abs() <= 1e-12 * b.upper);
    }
}

#[test]
fn report_is_consistent_with_individual_surpluses() {
    let cfg = DgpConfig::survey_like(600, 3).with_rho(0.4).unwrap();
    let ds = generate(&cfg).unwrap();
    let fit = fit_recursive(&cfg.spec(), &ds, &BiprobitOptions::default()).unwrap();
    let report = welfare_report(&fit.joint, &ds, &WelfareOptions::default()).unwrap();
    assert_eq!(report.n, report.per_respondent.len());
    for (row, rec) in report.per_respondent.iter().zip(ds.records()) {
        assert_eq!(row.id, rec.id);
        assert!((row.cv_money - cv_money(&fit.joint, rec).unwrap()).abs() < 1e-12);
        assert!((row.cv_labor - cv_labor(&fit.joint, rec).unwrap()).abs() < 1e-12);
        assert!((row.cv_total - (row.cv_money + row.labor_value)).abs() < 1e-9);
    }
    let means = summary_means(&report);
    let share = report.summary.wtp.mean / report.summary.total.mean;
    assert!((report.cash_share - share).abs() < 1e-12);
    assert!(means.values().all(|v| v.is_finite()));
    let table = welfare_table(&report);
    for label in ["Slack", "Peak", "Average", "Total"] {
        assert!(table.contains(label), "missing {label} row:\n{table}");
    }
}

#[test]
fn global_mode_uses_one_band() {
    let cfg = DgpConfig::survey_like(400, 4).with_rho(0.3).unwrap();
    let ds = generate(&cfg).unwrap();
    let fit = fit_recursive(&cfg.spec(), &ds, &BiprobitOptions::default()).unwrap();
    let opts = WelfareOptions {
        wage_mode: WageMode::Global,
        global_wages: Some((13.55, 17.71)),
        ..WelfareOptions::default()
    };
    let report = welfare_report(&fit.joint, &ds, &opts).unwrap();
    for row in &report.per_respondent {
        assert!((row.mean_w - report.shadow_wage.mean_w).abs() < 1e-15);
    }
    assert!((report.shadow_wage.lower - 0.3863 * 13.55).abs() < 1e-12);
}

#[test]
fn simulated_intervals_are_reproducible() {
    let cfg = DgpConfig::survey_like(500, 5).with_rho(0.3).unwrap();
    let ds = generate(&cfg).unwrap();
    let fit = fit_recursive(&cfg.spec(), &ds, &BiprobitOptions::default()).unwrap();
    let opts = WelfareOptions {
        sim_draws: 300,
        seed: 99,
        ..WelfareOptions::default()
    };
    let a = welfare_report(&fit.joint, &ds, &opts).unwrap();
    let b = welfare_report(&fit.joint, &ds, &opts).unwrap();
    assert_eq!(a, b);
    let ci = a.summary.wtp.ci.expect("interval requested");
    assert!(ci[0] < a.summary.wtp.mean && a.summary.wtp.mean < ci[1]);
}
