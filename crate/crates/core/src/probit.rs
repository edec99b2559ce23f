//! Single-equation probit by maximum likelihood.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bvn::{inverse_mills, ln_norm_cdf, norm_quantile};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Design, ModelSpec};
use crate::optimize::{self, covariance_from_hessian, Objective};

/// Estimate, standard error and t ratio of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coef {
    pub est: f64,
    pub se: f64,
    pub t: f64,
}

impl Coef {
    pub fn new(est: f64, se: f64) -> Self {
        Self { est, se, t: est / se }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProbitOptions {
    /// Convergence threshold on the relative gradient.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProbitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// A fitted single-equation probit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitResultJson", try_from = "FitResultJson")]
pub struct FitResult {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub vcov: DMatrix<f64>,
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    /// ∞-norm of the raw score at the reported estimate.
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn se(&self, j: usize) -> f64 {
        self.vcov[(j, j)].max(0.0).sqrt()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<Coef> {
        let j = self.position(name)?;
        Some(Coef::new(self.coefficients[j], self.se(j)))
    }

    pub fn table(&self) -> IndexMap<String, Coef> {
        self.names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.clone(), Coef::new(self.coefficients[j], self.se(j))))
            .collect()
    }

    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Estimation(format!(
                "probit for `{}` did not converge after {} iterations",
                self.spec.outcome, self.iterations
            )))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FitResultJson {
    spec: ModelSpec,
    coefficients: IndexMap<String, Coef>,
    loglik: f64,
    n: usize,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
    vcov: Vec<Vec<f64>>,
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: rows.len(),
        });
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

impl From<FitResult> for FitResultJson {
    fn from(f: FitResult) -> Self {
        Self {
            coefficients: f.table(),
            vcov: matrix_to_rows(&f.vcov),
            spec: f.spec,
            loglik: f.loglik,
            n: f.n,
            converged: f.converged,
            iterations: f.iterations,
            gradient_norm: f.gradient_norm,
        }
    }
}

impl TryFrom<FitResultJson> for FitResult {
    type Error = Error;
    fn try_from(j: FitResultJson) -> Result<Self> {
        let names: Vec<String> = j.coefficients.keys().cloned().collect();
        if names != j.spec.coef_names() {
            return Err(Error::SpecMismatch(
                "coefficient names do not match the stored specification".into(),
            ));
        }
        let vcov = rows_to_matrix(&j.vcov, names.len())?;
        Ok(Self {
            coefficients: j.coefficients.values().map(|c| c.est).collect(),
            names,
            vcov,
            spec: j.spec,
            loglik: j.loglik,
            n: j.n,
            converged: j.converged,
            iterations: j.iterations,
            gradient_norm: j.gradient_norm,
        })
    }
}

/// Log-likelihood, score and (optionally) Hessian of a probit design.
pub(crate) fn probit_derivatives(
    design: &Design,
    coefs: &[f64],
    want_hessian: bool,
) -> (f64, DVector<f64>, Option<DMatrix<f64>>) {
    let p = design.p();
    let mut ll = 0.0;
    let mut grad = DVector::zeros(p);
    let mut hess = want_hessian.then(|| DMatrix::zeros(p, p));
    for i in 0..design.n() {
        let x = design.row(i);
        let v = design.index(i, coefs);
        let q = if design.y[i] { 1.0 } else { -1.0 };
        ll += ln_norm_cdf(q * v);
        let lambda = q * inverse_mills(q * v);
        for (g, xj) in grad.iter_mut().zip(x) {
            *g += lambda * xj;
        }
        if let Some(h) = hess.as_mut() {
            let w = lambda * (lambda + v);
            for a in 0..p {
                for b in 0..=a {
                    h[(a, b)] -= w * x[a] * x[b];
                }
            }
        }
    }
    if let Some(h) = hess.as_mut() {
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
    }
    (ll, grad, hess)
}

/// `Σ_i [y_i ln Φ(v_i) + (1 − y_i) ln Φ(−v_i)]` and its gradient.
pub fn probit_loglik(spec: &ModelSpec, ds: &Dataset, coefs: &[f64]) -> Result<(f64, DVector<f64>)> {
    if coefs.len() != spec.n_coefs() {
        return Err(Error::Dimension {
            expected: spec.n_coefs(),
            got: coefs.len(),
        });
    }
    let design = Design::from_dataset(spec, ds)?;
    let (ll, g, _) = probit_derivatives(&design, coefs, false);
    Ok((ll, g))
}

struct ProbitProblem<'a> {
    design: &'a Design,
    col_sd: Vec<f64>,
}

/// Bound on a coefficient scaled by its regressor's standard deviation.
const DIVERGENCE_BOUND: f64 = 50.0;

impl Objective for ProbitProblem<'_> {
    fn value_grad(&mut self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let (ll, g, _) = probit_derivatives(self.design, theta.as_slice(), false);
        (ll, g)
    }

    fn hessian(&mut self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        probit_derivatives(self.design, theta.as_slice(), true).2
    }

    fn after_step(&mut self, theta: &DVector<f64>, step: &DVector<f64>) -> Result<()> {
        for (j, (t, s)) in theta.iter().zip(step.iter()).enumerate().skip(1) {
            let sd = self.col_sd[j];
            if (t * sd).abs() > DIVERGENCE_BOUND && (s * sd).abs() > 1e-3 {
                return Err(Error::Separation(self.design.names[j].clone()));
            }
        }
        Ok(())
    }
}

/// Fits a probit on a prepared design.
pub(crate) fn fit_design(spec: &ModelSpec, design: &Design, opts: &ProbitOptions) -> Result<FitResult> {
    design.require_variation(&spec.outcome)?;
    design.require_full_rank()?;
    design.check_separation()?;
    let ybar = design.y.iter().filter(|&&y| y).count() as f64 / design.n() as f64;
    let mut theta0 = DVector::zeros(design.p());
    theta0[0] = norm_quantile(ybar)?;

    let mut problem = ProbitProblem {
        design,
        col_sd: design.column_sds(),
    };
    let out = optimize::newton(&mut problem, theta0, opts.tol, opts.max_iter)?;
    if out.loglik > -1e-6 {
        return Err(Error::Separation("a combination of regressors".into()));
    }
    let (_, _, hess) = probit_derivatives(design, out.theta.as_slice(), true);
    let (vcov, _) = covariance_from_hessian(&hess.expect("hessian requested"));
    Ok(FitResult {
        spec: spec.clone(),
        names: design.names.clone(),
        coefficients: out.theta.iter().copied().collect(),
        vcov,
        loglik: out.loglik,
        n: design.n(),
        converged: out.converged,
        iterations: out.iterations,
        gradient_norm: out.gradient.amax(),
    })
}

/// Newton–Raphson probit fit on every complete record. A fit that exhausts
/// its iterations is returned with `converged = false`.
pub fn fit_probit(spec: &ModelSpec, ds: &Dataset, opts: &ProbitOptions) -> Result<FitResult> {
    let design = Design::from_dataset(spec, ds)?;
    fit_design(spec, &design, opts)
}
