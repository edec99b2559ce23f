//! Recursive bivariate probit: two probit equations with jointly normal
//! errors, where the first equation's binary outcome enters the second as a
//! regressor.
//!
//! The endogenous response is treated as observed data on the right-hand
//! side; the joint normal structure alone accounts for its correlation with
//! the second equation's error. Correlation is estimated through
//! `athrho = atanh(ρ)` so the search is unconstrained.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bvn::{ln_bvn_cdf_raw, ln_norm_cdf, quadrant_probs, Correlation, QuadrantProbs};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{complete_rows, Design, ModelSpec};
use crate::optimize::{self, covariance_from_hessian, numeric_hessian, BfgsOptions, Objective};
use crate::probit::{self, matrix_to_rows, rows_to_matrix, Coef, FitResult, ProbitOptions};
use crate::stats::{chi2_sf, TestResult};

/// |ρ| above which the fit is flagged as sitting on the boundary.
pub const BOUNDARY_RHO: f64 = 0.999;

/// The two equations of the recursive system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiprobitSpec {
    pub eq1: ModelSpec,
    pub eq2: ModelSpec,
}

impl BiprobitSpec {
    /// Checks the recursive structure. Returns warnings for conditions that
    /// weaken but do not break identification.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.eq1.validate()?;
        self.eq2.validate()?;
        match &self.eq2.endogenous_regressor {
            Some(e) if *e == self.eq1.outcome => {}
            _ => {
                return Err(Error::Spec(format!(
                    "second equation must list `{}` as its endogenous regressor",
                    self.eq1.outcome
                )))
            }
        }
        if self.eq1.outcome == self.eq2.outcome {
            return Err(Error::Spec("the two equations share an outcome".into()));
        }
        let mut warnings = Vec::new();
        if !self.eq1.regressors.iter().any(|r| !self.eq2.regressors.contains(r)) {
            warnings.push(
                "no exclusion restriction: every first-equation regressor also enters the \
                 second equation, so identification rests on functional form"
                    .to_string(),
            );
        }
        Ok(warnings)
    }

    pub fn param_names(&self) -> Vec<String> {
        let tag = |eq: &ModelSpec| {
            eq.coef_names()
                .into_iter()
                .map(|n| format!("{}:{n}", eq.outcome))
                .collect::<Vec<_>>()
        };
        let mut names = tag(&self.eq1);
        names.extend(tag(&self.eq2));
        names.push("athrho".into());
        names
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BiprobitOptions {
    pub bfgs: BfgsOptions,
    pub probit: ProbitOptions,
}

/// A fitted recursive bivariate probit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BiprobitFitJson", try_from = "BiprobitFitJson")]
pub struct BiprobitFit {
    pub spec: BiprobitSpec,
    pub eq1_names: Vec<String>,
    pub eq1_coefs: Vec<f64>,
    pub eq2_names: Vec<String>,
    pub eq2_coefs: Vec<f64>,
    pub athrho: f64,
    /// Always `athrho.tanh()`.
    pub rho: f64,
    /// Over (eq1 coefficients, eq2 coefficients, athrho).
    pub vcov: DMatrix<f64>,
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub boundary_warning: bool,
}

impl BiprobitFit {
    fn p1(&self) -> usize {
        self.eq1_coefs.len()
    }

    pub fn params(&self) -> DVector<f64> {
        let mut v: Vec<f64> = self.eq1_coefs.clone();
        v.extend(&self.eq2_coefs);
        v.push(self.athrho);
        DVector::from_vec(v)
    }

    fn se_at(&self, k: usize) -> f64 {
        self.vcov[(k, k)].max(0.0).sqrt()
    }

    pub fn eq1_table(&self) -> IndexMap<String, Coef> {
        self.eq1_names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.clone(), Coef::new(self.eq1_coefs[j], self.se_at(j))))
            .collect()
    }

    pub fn eq2_table(&self) -> IndexMap<String, Coef> {
        let off = self.p1();
        self.eq2_names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.clone(), Coef::new(self.eq2_coefs[j], self.se_at(off + j))))
            .collect()
    }

    pub fn athrho_coef(&self) -> Coef {
        Coef::new(self.athrho, self.se_at(self.vcov.nrows() - 1))
    }

    /// Delta-method standard error of ρ; withheld on the boundary.
    pub fn rho_se(&self) -> Option<f64> {
        (self.rho.abs() <= BOUNDARY_RHO)
            .then(|| (1.0 - self.rho * self.rho) * self.athrho_coef().se)
    }

    /// Coefficients, names and covariance block of equation 1 or 2.
    pub fn equation(&self, k: u8) -> Result<(Vec<String>, Vec<f64>, DMatrix<f64>)> {
        let (p1, p2) = (self.p1(), self.eq2_coefs.len());
        match k {
            1 => Ok((
                self.eq1_names.clone(),
                self.eq1_coefs.clone(),
                self.vcov.view((0, 0), (p1, p1)).into_owned(),
            )),
            2 => Ok((
                self.eq2_names.clone(),
                self.eq2_coefs.clone(),
                self.vcov.view((p1, p1), (p2, p2)).into_owned(),
            )),
            _ => Err(Error::Spec(format!("equation must be 1 or 2, got {k}"))),
        }
    }

    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Estimation(format!(
                "bivariate probit did not converge after {} iterations",
                self.iterations
            )))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EquationJson {
    outcome: String,
    coefficients: IndexMap<String, Coef>,
}

#[derive(Serialize, Deserialize)]
struct BiprobitFitJson {
    spec: BiprobitSpec,
    eq1: EquationJson,
    eq2: EquationJson,
    athrho: Coef,
    rho: f64,
    rho_se: Option<f64>,
    loglik: f64,
    n: usize,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
    boundary_warning: bool,
    vcov: Vec<Vec<f64>>,
}

impl From<BiprobitFit> for BiprobitFitJson {
    fn from(f: BiprobitFit) -> Self {
        Self {
            eq1: EquationJson {
                outcome: f.spec.eq1.outcome.clone(),
                coefficients: f.eq1_table(),
            },
            eq2: EquationJson {
                outcome: f.spec.eq2.outcome.clone(),
                coefficients: f.eq2_table(),
            },
            athrho: f.athrho_coef(),
            rho: f.rho,
            rho_se: f.rho_se(),
            vcov: matrix_to_rows(&f.vcov),
            spec: f.spec,
            loglik: f.loglik,
            n: f.n,
            converged: f.converged,
            iterations: f.iterations,
            gradient_norm: f.gradient_norm,
            boundary_warning: f.boundary_warning,
        }
    }
}

impl TryFrom<BiprobitFitJson> for BiprobitFit {
    type Error = Error;
    fn try_from(j: BiprobitFitJson) -> Result<Self> {
        let eq1_names: Vec<String> = j.eq1.coefficients.keys().cloned().collect();
        let eq2_names: Vec<String> = j.eq2.coefficients.keys().cloned().collect();
        if eq1_names != j.spec.eq1.coef_names() || eq2_names != j.spec.eq2.coef_names() {
            return Err(Error::SpecMismatch(
                "coefficient names do not match the stored specification".into(),
            ));
        }
        let dim = eq1_names.len() + eq2_names.len() + 1;
        Ok(Self {
            vcov: rows_to_matrix(&j.vcov, dim)?,
            eq1_coefs: j.eq1.coefficients.values().map(|c| c.est).collect(),
            eq2_coefs: j.eq2.coefficients.values().map(|c| c.est).collect(),
            eq1_names,
            eq2_names,
            athrho: j.athrho.est,
            rho: j.athrho.est.tanh(),
            spec: j.spec,
            loglik: j.loglik,
            n: j.n,
            converged: j.converged,
            iterations: j.iterations,
            gradient_norm: j.gradient_norm,
            boundary_warning: j.boundary_warning,
        })
    }
}

/// `ln φ(0)`.
const LN_PDF0: f64 = -0.918_938_533_204_672_8;

/// Both equations' designs over a common estimation sample.
pub(crate) struct JointDesign {
    pub eq1: Design,
    pub eq2: Design,
}

impl JointDesign {
    pub fn build(spec: &BiprobitSpec, ds: &Dataset) -> Result<Self> {
        let rows = complete_rows(ds, &[&spec.eq1, &spec.eq2])?;
        Ok(Self {
            eq1: Design::build(&spec.eq1, ds, &rows)?,
            eq2: Design::build(&spec.eq2, ds, &rows)?,
        })
    }

    fn dim(&self) -> usize {
        self.eq1.p() + self.eq2.p() + 1
    }

    /// Joint log-likelihood and analytic score at `theta`.
    pub fn loglik_grad(&self, theta: &[f64]) -> (f64, DVector<f64>) {
        let (p1, p2) = (self.eq1.p(), self.eq2.p());
        let beta = &theta[..p1];
        let gamma = &theta[p1..p1 + p2];
        let athrho = theta[p1 + p2];
        let rho = athrho.tanh();
        // 1 − ρ² without cancellation near the boundary
        let sech = 1.0 / athrho.cosh();
        let one_minus_r2 = sech * sech;
        let s = sech;

        let mut ll = 0.0;
        let mut grad = DVector::zeros(p1 + p2 + 1);
        for i in 0..self.eq1.n() {
            let q1 = if self.eq1.y[i] { 1.0 } else { -1.0 };
            let q2 = if self.eq2.y[i] { 1.0 } else { -1.0 };
            let w1 = q1 * self.eq1.index(i, beta);
            let w2 = q2 * self.eq2.index(i, gamma);
            let r = q1 * q2 * rho;
            // score terms are ratios to the cell probability, formed in logs
            let ln_p = ln_bvn_cdf_raw(w1, w2, r);
            ll += ln_p;
            let d1 = (LN_PDF0 - 0.5 * w1 * w1 + ln_norm_cdf((w2 - r * w1) / s) - ln_p).exp();
            let d2 = (LN_PDF0 - 0.5 * w2 * w2 + ln_norm_cdf((w1 - r * w2) / s) - ln_p).exp();
            let quad = (w1 * w1 + w2 * w2 - 2.0 * r * w1 * w2) / one_minus_r2;
            let dr = (-0.5 * quad - (2.0 * std::f64::consts::PI * s).ln() - ln_p).exp();

            for (g, x) in grad.rows_mut(0, p1).iter_mut().zip(self.eq1.row(i)) {
                *g += q1 * d1 * x;
            }
            for (g, x) in grad.rows_mut(p1, p2).iter_mut().zip(self.eq2.row(i)) {
                *g += q2 * d2 * x;
            }
            grad[p1 + p2] += q1 * q2 * dr * one_minus_r2;
        }
        (ll, grad)
    }
}

struct JointProblem<'a> {
    design: &'a JointDesign,
}

/// Search bound on |athrho|; there |ρ| is within 2e-13 of one.
pub const ATHRHO_BOUND: f64 = 15.0;

impl Objective for JointProblem<'_> {
    fn value_grad(&mut self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let (ll, g) = self.design.loglik_grad(theta.as_slice());
        if g.iter().all(|v| v.is_finite()) {
            (ll, g)
        } else {
            (f64::NEG_INFINITY, g)
        }
    }

    fn project(&self, theta: &mut DVector<f64>) {
        let k = theta.len() - 1;
        theta[k] = theta[k].clamp(-ATHRHO_BOUND, ATHRHO_BOUND);
    }
}

/// Joint log-likelihood and score at `params = (eq1 coefs, eq2 coefs, athrho)`.
pub fn biprobit_loglik(
    spec: &BiprobitSpec,
    ds: &Dataset,
    params: &[f64],
) -> Result<(f64, DVector<f64>)> {
    spec.validate()?;
    let design = JointDesign::build(spec, ds)?;
    if params.len() != design.dim() {
        return Err(Error::Dimension {
            expected: design.dim(),
            got: params.len(),
        });
    }
    Ok(design.loglik_grad(params))
}

/// The joint fit together with the equation-by-equation fits on the same
/// sample, which serve as warm starts and as the restricted (ρ = 0) model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecursiveFit {
    pub joint: BiprobitFit,
    pub eq1: FitResult,
    pub eq2: FitResult,
    pub warnings: Vec<String>,
}

/// Fits the univariate pair and then the joint model. Non-convergence of the
/// joint model is reported through `joint.converged`.
pub fn fit_recursive(spec: &BiprobitSpec, ds: &Dataset, opts: &BiprobitOptions) -> Result<RecursiveFit> {
    let warnings = spec.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let design = JointDesign::build(spec, ds)?;
    let eq1 = probit::fit_design(&spec.eq1, &design.eq1, &opts.probit)?.ensure_converged()?;
    let eq2 = probit::fit_design(&spec.eq2, &design.eq2, &opts.probit)?.ensure_converged()?;
    let joint = fit_joint(spec, &design, &eq1, &eq2, opts)?;
    Ok(RecursiveFit {
        joint,
        eq1,
        eq2,
        warnings,
    })
}

/// Joint maximum-likelihood fit of the recursive system.
pub fn fit_biprobit(spec: &BiprobitSpec, ds: &Dataset, opts: &BiprobitOptions) -> Result<BiprobitFit> {
    fit_recursive(spec, ds, opts).map(|f| f.joint)
}

fn fit_joint(
    spec: &BiprobitSpec,
    design: &JointDesign,
    eq1: &FitResult,
    eq2: &FitResult,
    opts: &BiprobitOptions,
) -> Result<BiprobitFit> {
    let (p1, p2) = (design.eq1.p(), design.eq2.p());
    let dim = design.dim();
    let mut theta0 = DVector::zeros(dim);
    theta0.rows_mut(0, p1).copy_from_slice(&eq1.coefficients);
    theta0.rows_mut(p1, p2).copy_from_slice(&eq2.coefficients);

    let mut problem = JointProblem { design };

    // Initial inverse curvature: the univariate covariances plus a finite
    // difference for athrho.
    let mut binv0 = DMatrix::zeros(dim, dim);
    binv0.view_mut((0, 0), (p1, p1)).copy_from(&eq1.vcov);
    binv0.view_mut((p1, p1), (p2, p2)).copy_from(&eq2.vcov);
    let delta = 1e-4;
    let mut up = theta0.clone();
    up[dim - 1] += delta;
    let mut down = theta0.clone();
    down[dim - 1] -= delta;
    let h_aa = (problem.value_grad(&up).1[dim - 1] - problem.value_grad(&down).1[dim - 1])
        / (2.0 * delta);
    binv0[(dim - 1, dim - 1)] = if h_aa < 0.0 { -1.0 / h_aa } else { 1.0 / design.eq1.n() as f64 };

    let out = optimize::bfgs(&mut problem, theta0, binv0, opts.bfgs)?;
    let hess = numeric_hessian(&mut problem, &out.theta);
    let (vcov, regular) = covariance_from_hessian(&hess);
    let athrho = out.theta[dim - 1];
    let rho = athrho.tanh();
    let boundary_warning = rho.abs() > BOUNDARY_RHO;
    if boundary_warning {
        log::warn!("correlation estimate {rho} is on the boundary (athrho = {athrho})");
    }
    if !regular {
        log::warn!("information matrix is singular; covariance uses a pseudo-inverse");
    }
    Ok(BiprobitFit {
        spec: spec.clone(),
        eq1_names: design.eq1.names.clone(),
        eq1_coefs: out.theta.rows(0, p1).iter().copied().collect(),
        eq2_names: design.eq2.names.clone(),
        eq2_coefs: out.theta.rows(p1, p2).iter().copied().collect(),
        athrho,
        rho,
        vcov,
        loglik: out.loglik,
        n: design.eq1.n(),
        converged: out.converged,
        iterations: out.iterations,
        gradient_norm: out.gradient.amax(),
        boundary_warning,
    })
}

/// Predicted cell probabilities for each record of the estimation sample.
pub fn predict_cells(fit: &BiprobitFit, ds: &Dataset) -> Result<Vec<QuadrantProbs>> {
    let design = JointDesign::build(&fit.spec, ds)?;
    let rho = Correlation::from_athrho(fit.athrho)?;
    (0..design.eq1.n())
        .map(|i| {
            quadrant_probs(
                design.eq1.index(i, &fit.eq1_coefs),
                design.eq2.index(i, &fit.eq2_coefs),
                rho,
            )
        })
        .collect()
}

/// Likelihood-ratio test of ρ = 0 against the equation-by-equation fits,
/// which must use the same specifications (the second keeps the endogenous
/// response as an ordinary regressor).
pub fn lr_test_rho(joint: &BiprobitFit, restricted_eq1: &FitResult, restricted_eq2: &FitResult) -> Result<TestResult> {
    if restricted_eq1.names != joint.eq1_names || restricted_eq1.spec.outcome != joint.spec.eq1.outcome {
        return Err(Error::SpecMismatch(
            "restricted first equation differs from the joint model".into(),
        ));
    }
    if restricted_eq2.names != joint.eq2_names || restricted_eq2.spec.outcome != joint.spec.eq2.outcome {
        return Err(Error::SpecMismatch(
            "restricted second equation differs from the joint model".into(),
        ));
    }
    Ok(lr_from_logliks(
        joint.loglik,
        restricted_eq1.loglik + restricted_eq2.loglik,
    ))
}

pub(crate) fn lr_from_logliks(joint: f64, restricted: f64) -> TestResult {
    let raw = 2.0 * (joint - restricted);
    if raw < -1e-6 {
        log::warn!("joint log-likelihood below the restricted model by {}", -raw / 2.0);
    }
    let stat = raw.max(0.0);
    TestResult::new("LR test of rho = 0", stat, vec![1.0], chi2_sf(stat, 1.0), 0.05)
}

/// Compares the endogenous response's coefficient between the independent
/// and the joint second-equation fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogeneityReport {
    pub variable: String,
    pub univariate: Coef,
    pub joint: Coef,
    pub ratio: f64,
    pub sign_agreement: bool,
    pub endogeneity_indicated: bool,
}

pub fn exogeneity_diagnostic(univ_eq2: &FitResult, joint: &BiprobitFit) -> Result<ExogeneityReport> {
    let name = joint.spec.eq1.outcome.clone();
    let univariate = univ_eq2
        .coef(&name)
        .ok_or_else(|| Error::Spec(format!("univariate fit has no coefficient on `{name}`")))?;
    let joint_coef = *joint
        .eq2_table()
        .get(&name)
        .ok_or_else(|| Error::Spec(format!("joint fit has no coefficient on `{name}`")))?;
    let sign_agreement = univariate.est.signum() == joint_coef.est.signum();
    let big_shift = (univariate.est - joint_coef.est).abs() > 2.0 * joint_coef.se;
    Ok(ExogeneityReport {
        variable: name,
        ratio: univariate.est / joint_coef.est,
        sign_agreement,
        endogeneity_indicated: !sign_agreement || big_shift,
        univariate,
        joint: joint_coef,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::biprobit_toy;

    #[test]
    fn spec_requires_recursive_link() {
        let spec = BiprobitSpec {
            eq1: ModelSpec::new("y1", &["bid_cash"]),
            eq2: ModelSpec::new("y2", &["bid_labor", "y1"]),
        };
        assert!(spec.validate().is_err());
        let spec = BiprobitSpec {
            eq2: spec.eq2.with_endogenous("y1"),
            ..spec
        };
        assert!(spec.validate().unwrap().is_empty());
        let no_exclusion = BiprobitSpec {
            eq1: ModelSpec::new("y1", &["bid_labor"]),
            ..spec
        };
        assert_eq!(no_exclusion.validate().unwrap().len(), 1);
    }

    #[test]
    fn single_record_cell_probability() {
        let (ds, spec) = biprobit_toy(&[(0.0, 0.0, true, false)]);
        let (ll, _) = biprobit_loglik(&spec, &ds, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((ll - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dimension_checked() {
        let (ds, spec) = biprobit_toy(&[(0.0, 0.0, true, false)]);
        assert!(matches!(
            biprobit_loglik(&spec, &ds, &[0.0; 3]),
            Err(Error::Dimension { expected: 6, got: 3 })
        ));
    }

    #[test]
    fn lr_arithmetic() {
        let t = lr_from_logliks(-100.0, -110.0);
        assert_eq!(t.statistic, Some(20.0));
        assert!((t.p_value.unwrap() - 7.744216431044084e-6).abs() < 1e-17);
        assert!(t.reject);
        let t = lr_from_logliks(-50.0, -50.0);
        assert_eq!(t.statistic, Some(0.0));
        assert_eq!(t.p_value, Some(1.0));
        assert!(!t.reject);
        let t = lr_from_logliks(-50.0, -50.0 + 1e-9);
        assert_eq!(t.statistic, Some(0.0));
        let t = lr_from_logliks(0.0, -130.027 / 2.0);
        assert!(t.p_value.unwrap() < 1e-15);
        assert_eq!(t.verdict(), "reject");
    }
}
