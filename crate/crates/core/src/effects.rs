//! Average marginal effects on a probit index, with delta-method standard
//! errors.
//!
//! For the second equation of the recursive model the effects are taken on
//! the structural index Φ(v2), holding the first-equation response as a
//! conditioning regressor, so the endogenous response carries its own
//! effect.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::biprobit::BiprobitFit;
use crate::bvn::{norm_cdf, norm_pdf};
use crate::data::{vars, Dataset, VarKind};
use crate::error::{Error, Result};
use crate::model::{complete_rows, dot, Design, ModelSpec};
use crate::probit::FitResult;

/// z value of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmeRow {
    pub variable: String,
    pub ame: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub kind: VarKind,
    /// Sample mean for continuous variables, the base level 0 for dummies.
    pub eval_base: f64,
}

impl AmeRow {
    pub fn from_estimate(variable: &str, ame: f64, se: f64, kind: VarKind, eval_base: f64) -> Self {
        Self {
            variable: variable.to_string(),
            ame,
            se,
            ci_low: ame - Z_95 * se,
            ci_high: ame + Z_95 * se,
            kind,
            eval_base,
        }
    }
}

/// Either kind of fitted model.
#[derive(Debug, Clone, Copy)]
pub enum FitRef<'a> {
    Probit(&'a FitResult),
    Biprobit(&'a BiprobitFit),
}

impl<'a> From<&'a FitResult> for FitRef<'a> {
    fn from(f: &'a FitResult) -> Self {
        FitRef::Probit(f)
    }
}

impl<'a> From<&'a BiprobitFit> for FitRef<'a> {
    fn from(f: &'a BiprobitFit) -> Self {
        FitRef::Biprobit(f)
    }
}

/// Specification, coefficients and covariance block of one equation.
#[derive(Debug, Clone)]
pub struct EquationCoefs {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub coefs: Vec<f64>,
    pub vcov: DMatrix<f64>,
}

impl FitRef<'_> {
    /// Equation 1 is the cash equation, 2 the labor equation. A
    /// single-equation fit only answers for its own outcome.
    pub fn equation(&self, k: u8) -> Result<EquationCoefs> {
        match *self {
            FitRef::Biprobit(f) => {
                let (names, coefs, vcov) = f.equation(k)?;
                let spec = if k == 1 { &f.spec.eq1 } else { &f.spec.eq2 };
                Ok(EquationCoefs {
                    spec: spec.clone(),
                    names,
                    coefs,
                    vcov,
                })
            }
            FitRef::Probit(f) => {
                let own = if f.spec.outcome == vars::Y2 { 2 } else { 1 };
                if k != own {
                    return Err(Error::SpecMismatch(format!(
                        "single-equation fit for `{}` has no equation {k}",
                        f.spec.outcome
                    )));
                }
                Ok(EquationCoefs {
                    spec: f.spec.clone(),
                    names: f.names.clone(),
                    coefs: f.coefficients.clone(),
                    vcov: f.vcov.clone(),
                })
            }
        }
    }

    /// Records used in estimation: complete for every equation of the fit.
    pub fn sample_rows(&self, ds: &Dataset) -> Result<Vec<usize>> {
        match *self {
            FitRef::Biprobit(f) => complete_rows(ds, &[&f.spec.eq1, &f.spec.eq2]),
            FitRef::Probit(f) => complete_rows(ds, &[&f.spec]),
        }
    }
}

/// Average marginal effect of every regressor in the chosen equation.
/// Continuous: `mean φ(v_i)·β_k`; dummy: `mean [Φ(v_i | d=1) − Φ(v_i | d=0)]`.
pub fn ame<'a>(fit: impl Into<FitRef<'a>>, ds: &Dataset, equation: u8) -> Result<Vec<AmeRow>> {
    let fit = fit.into();
    let eq = fit.equation(equation)?;
    let design = Design::build(&eq.spec, ds, &fit.sample_rows(ds)?)?;
    ame_for(&eq, &design, ds)
}

fn ame_for(eq: &EquationCoefs, design: &Design, ds: &Dataset) -> Result<Vec<AmeRow>> {
    let (n, p) = (design.n(), design.p());
    if n == 0 {
        return Err(Error::InsufficientData("empty estimation sample".into()));
    }
    let nf = n as f64;
    let beta = &eq.coefs;
    let mut rows = Vec::new();
    for k in 1..p {
        let name = &design.names[k];
        let kind = ds
            .kind_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        let mut grad = DVector::zeros(p);
        let (effect, base) = match kind {
            VarKind::Continuous => {
                let mut sum = 0.0;
                let mut mean_x = 0.0;
                for i in 0..n {
                    let x = design.row(i);
                    let v = dot(x, beta);
                    let phi = norm_pdf(v);
                    sum += phi * beta[k];
                    mean_x += x[k];
                    for j in 0..p {
                        grad[j] -= beta[k] * phi * v * x[j];
                    }
                    grad[k] += phi;
                }
                (sum / nf, mean_x / nf)
            }
            VarKind::Dummy => {
                let mut sum = 0.0;
                let mut on = vec![0.0; p];
                let mut off = vec![0.0; p];
                for i in 0..n {
                    on.copy_from_slice(design.row(i));
                    off.copy_from_slice(design.row(i));
                    on[k] = 1.0;
                    off[k] = 0.0;
                    let v1 = dot(&on, beta);
                    let v0 = dot(&off, beta);
                    sum += norm_cdf(v1) - norm_cdf(v0);
                    let (f1, f0) = (norm_pdf(v1), norm_pdf(v0));
                    for j in 0..p {
                        grad[j] += f1 * on[j] - f0 * off[j];
                    }
                }
                (sum / nf, 0.0)
            }
        };
        grad /= nf;
        let var = (grad.transpose() * &eq.vcov * &grad)[(0, 0)];
        rows.push(AmeRow::from_estimate(name, effect, var.max(0.0).sqrt(), kind, base));
    }
    Ok(rows)
}

/// Aligned text table: effect, standard error, 95% interval and the value
/// the effect was evaluated at.
pub fn ame_report(rows: &[AmeRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.variable.len() + usize::from(r.kind == VarKind::Dummy))
        .max()
        .unwrap_or(0)
        .max("Variable".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>8}  {:>9}  {:>8}  {:>8}  {:>8}",
        "Variable", "AME", "Std. Err.", "CI low", "CI high", "Mean"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 52));
    for r in rows {
        let label = match r.kind {
            VarKind::Dummy => format!("{}*", r.variable),
            VarKind::Continuous => r.variable.clone(),
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>9.2}  {:>8.2}  {:>8.2}  {:>8.2}",
            label, r.ame, r.se, r.ci_low, r.ci_high, r.eval_base
        );
    }
    let _ = writeln!(out, "(*) discrete change of a dummy from 0 to 1");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, VariableMeta};
    use crate::testing::record;
    use indexmap::IndexMap;

    fn dummy_dataset(values: &[f64]) -> Dataset {
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &d)| record(i, &[("d", d)], i % 2 == 0, false))
            .collect();
        let mut meta = IndexMap::new();
        meta.insert(
            "d".to_string(),
            VariableMeta {
                kind: VarKind::Dummy,
                description: String::new(),
            },
        );
        Dataset::new(records, meta).unwrap()
    }

    fn probit_fit(coefs: Vec<f64>) -> FitResult {
        let p = coefs.len();
        FitResult {
            spec: ModelSpec::new("y1", &["d"]),
            names: vec!["constant".into(), "d".into()],
            coefficients: coefs,
            vcov: DMatrix::identity(p, p) * 0.01,
            loglik: 0.0,
            n: 1,
            converged: true,
            iterations: 0,
            gradient_norm: 0.0,
        }
    }

    #[test]
    fn dummy_formula_on_single_record() {
        let ds = dummy_dataset(&[0.0]);
        let c = 0.7;
        let rows = ame(&probit_fit(vec![0.0, c]), &ds, 1).unwrap();
        assert!((rows[0].ame - (norm_cdf(c) - 0.5)).abs() < 1e-16);
        assert_eq!(rows[0].kind, VarKind::Dummy);
        assert_eq!(rows[0].eval_base, 0.0);
        assert!(rows[0].ci_low <= rows[0].ame && rows[0].ame <= rows[0].ci_high);
    }

    #[test]
    fn zero_coefficient_gives_exact_zero() {
        let ds = dummy_dataset(&[0.0, 1.0, 1.0]);
        let rows = ame(&probit_fit(vec![0.3, 0.0]), &ds, 1).unwrap();
        assert_eq!(rows[0].ame, 0.0);
    }

    #[test]
    fn equation_mismatch() {
        let ds = dummy_dataset(&[0.0, 1.0]);
        assert!(matches!(
            ame(&probit_fit(vec![0.3, 0.1]), &ds, 2),
            Err(Error::SpecMismatch(_))
        ));
    }

    #[test]
    fn report_layout() {
        let rows = vec![
            AmeRow::from_estimate("y1", -0.38, 0.06, VarKind::Dummy, 0.0),
            AmeRow::from_estimate("Young household head", 0.52, 0.0663, VarKind::Dummy, 0.0),
            AmeRow::from_estimate("BidLabor", -0.16, 0.0, VarKind::Continuous, 1.99),
        ];
        let text = ame_report(&rows);
        let line = |key: &str| -> Vec<String> {
            let l = text.lines().find(|l| l.starts_with(key)).unwrap();
            l[key.len()..].split_whitespace().map(String::from).collect()
        };
        let y1 = line("y1*");
        assert_eq!(y1, ["-0.38", "0.06", "-0.50", "-0.26", "0.00"]);
        assert_eq!(line("Young household head*"), ["0.52", "0.07", "0.39", "0.65", "0.00"]);
        assert_eq!(line("BidLabor"), ["-0.16", "0.00", "-0.16", "-0.16", "1.99"]);
    }
}
