//! Side-by-side coefficient table for the independent and joint fits.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::biprobit::RecursiveFit;
use crate::data::vars;
use crate::optimize::covariance_from_hessian;
use crate::probit::{Coef, FitResult};
use crate::stats::{chi2_sf, TestResult};

/// Wald test that every coefficient except the constant is zero.
pub fn wald_slopes(names: &[String], coefs: &[f64], vcov: &DMatrix<f64>) -> TestResult {
    let idx: Vec<usize> = (0..names.len()).filter(|&j| names[j] != vars::CONSTANT).collect();
    if idx.is_empty() {
        return TestResult::degenerate("Wald test of slopes", "no slope coefficients");
    }
    let b = DVector::from_iterator(idx.len(), idx.iter().map(|&j| coefs[j]));
    let v = DMatrix::from_fn(idx.len(), idx.len(), |a, c| vcov[(idx[a], idx[c])]);
    // pseudo-inverse of the covariance block, as for the information matrix
    let (vinv, _) = covariance_from_hessian(&(-v));
    let stat = (b.transpose() * vinv * &b)[(0, 0)].max(0.0);
    let df = idx.len() as f64;
    TestResult::new("Wald test of slopes", stat, vec![df], chi2_sf(stat, df), 0.05)
}

/// Summary statistics of one column of the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub loglik: f64,
    pub wald: TestResult,
    pub n: usize,
}

fn univariate_summary(eq1: &FitResult, eq2: &FitResult) -> ColumnSummary {
    let w1 = wald_slopes(&eq1.names, &eq1.coefficients, &eq1.vcov);
    let w2 = wald_slopes(&eq2.names, &eq2.coefficients, &eq2.vcov);
    let stat = w1.statistic.unwrap_or(0.0) + w2.statistic.unwrap_or(0.0);
    let df = w1.df.iter().chain(&w2.df).sum::<f64>();
    ColumnSummary {
        loglik: eq1.loglik + eq2.loglik,
        wald: TestResult::new("Wald test of slopes", stat, vec![df], chi2_sf(stat, df), 0.05),
        n: eq1.n,
    }
}

fn joint_summary(fit: &RecursiveFit) -> ColumnSummary {
    let j = &fit.joint;
    let names: Vec<String> = j.eq1_names.iter().chain(&j.eq2_names).cloned().collect();
    let coefs: Vec<f64> = j.eq1_coefs.iter().chain(&j.eq2_coefs).copied().collect();
    let p = names.len();
    let v = j.vcov.view((0, 0), (p, p)).into_owned();
    ColumnSummary {
        loglik: j.loglik,
        wald: wald_slopes(&names, &coefs, &v),
        n: j.n,
    }
}

/// Display order within an equation: the endogenous response first, the
/// constant last.
fn display_order(names: &[String], endogenous: Option<&str>) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(names.len());
    order.extend((0..names.len()).filter(|&j| Some(names[j].as_str()) == endogenous));
    order.extend(
        (0..names.len())
            .filter(|&j| Some(names[j].as_str()) != endogenous && names[j] != vars::CONSTANT),
    );
    order.extend((0..names.len()).filter(|&j| names[j] == vars::CONSTANT));
    order
}

fn cell(c: Option<Coef>) -> String {
    match c {
        Some(c) => format!("{:>9.2} {:>8.2}", c.est, c.t),
        None => format!("{:>9} {:>8}", "", ""),
    }
}

/// Coefficients and t ratios of the separate and joint fits, second
/// equation first, followed by athrho, ρ, log likelihoods, Wald tests, the
/// sample size and the LR test of ρ = 0.
pub fn comparison_table(fit: &RecursiveFit, lr: &TestResult) -> String {
    let j = &fit.joint;
    let width = j
        .eq1_names
        .iter()
        .chain(&j.eq2_names)
        .map(|n| n.len() + 2)
        .chain([16, "Dependent ".len() + j.spec.eq2.outcome.len()])
        .max()
        .unwrap_or(16);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:^18}  {:^18}", "Equation, variable", "Univariate probit", "Bivariate probit");
    let _ = writeln!(out, "{:<width$}  {:>9} {:>8}  {:>9} {:>8}", "", "Coef.", "t", "Coef.", "t");
    let rule = "-".repeat(width + 40);
    let _ = writeln!(out, "{rule}");

    let joint_tables = [j.eq2_table(), j.eq1_table()];
    let univariate = [&fit.eq2, &fit.eq1];
    let specs = [&j.spec.eq2, &j.spec.eq1];
    for ((table, uni), spec) in joint_tables.iter().zip(univariate).zip(specs) {
        let _ = writeln!(out, "Dependent {}", spec.outcome);
        let names: Vec<String> = table.keys().cloned().collect();
        for k in display_order(&names, spec.endogenous_regressor.as_deref()) {
            let name = &names[k];
            let _ = writeln!(
                out,
                "  {:<w$}  {}  {}",
                name,
                cell(uni.coef(name)),
                cell(table.get(name).copied()),
                w = width - 2
            );
        }
    }
    let _ = writeln!(out, "{:<width$}  {}  {}", "athrho", cell(None), cell(Some(j.athrho_coef())));
    let _ = writeln!(out, "{:<width$}  {:>18}  {:>9.2}", "rho", "", j.rho);
    let (u, b) = (univariate_summary(&fit.eq1, &fit.eq2), joint_summary(fit));
    let _ = writeln!(out, "{:<width$}  {:>9.2} {:>8}  {:>9.2}", "Log likelihood", u.loglik, "", b.loglik);
    let stat = |t: &TestResult| t.statistic.unwrap_or(f64::NAN);
    let pval = |t: &TestResult| t.p_value.unwrap_or(f64::NAN);
    let _ = writeln!(out, "{:<width$}  {:>9.2} {:>8}  {:>9.2}", "Wald chi-squared", stat(&u.wald), "", stat(&b.wald));
    let _ = writeln!(out, "{:<width$}  {:>9.2} {:>8}  {:>9.2}", "P", pval(&u.wald), "", pval(&b.wald));
    let _ = writeln!(out, "{:<width$}  {:>9} {:>8}  {:>9}", "N", u.n, "", b.n);
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(
        out,
        "LR test of rho = 0: chi2(1) = {:.3}  Prob > chi2 = {:.4}",
        stat(lr),
        pval(lr)
    );
    if j.boundary_warning {
        let _ = writeln!(out, "rho is on the boundary of the parameter space");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wald_on_diagonal_covariance() {
        let names = vec!["constant".to_string(), "a".into(), "b".into()];
        let vcov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25, 4.0]));
        let t = wald_slopes(&names, &[9.0, 1.0, 2.0], &vcov);
        // 1/0.25 + 4/4
        assert!((t.statistic.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(t.df, vec![2.0]);
    }

    #[test]
    fn constant_goes_last_endogenous_first() {
        let names: Vec<String> = ["constant", "bid", "y1", "x"].iter().map(|s| s.to_string()).collect();
        assert_eq!(display_order(&names, Some("y1")), vec![2, 1, 3, 0]);
    }
}
