//! Maximizers for smooth log-likelihoods.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A log-likelihood with analytic gradient.
pub trait Objective {
    fn value_grad(&mut self, theta: &DVector<f64>) -> (f64, DVector<f64>);

    /// Analytic Hessian, when available.
    fn hessian(&mut self, _theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Maps a trial point back into the feasible box.
    fn project(&self, _theta: &mut DVector<f64>) {}

    /// Called after every accepted step; may abort the search.
    fn after_step(&mut self, _theta: &DVector<f64>, _step: &DVector<f64>) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub theta: DVector<f64>,
    pub loglik: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Relative gradient `max_j |g_j| · max(|θ_j|, 1) / max(|ℓ|, 1)`; insensitive
/// to the units of both parameters and likelihood.
pub fn scaled_gradient(theta: &DVector<f64>, grad: &DVector<f64>, loglik: f64) -> f64 {
    let denom = loglik.abs().max(1.0);
    theta
        .iter()
        .zip(grad.iter())
        .map(|(t, g)| g.abs() * t.abs().max(1.0) / denom)
        .fold(0.0, f64::max)
}

const MAX_HALVINGS: usize = 60;

fn bfgs_update(binv: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let sy = s.dot(y);
    if !(sy > 1e-12 * s.norm() * y.norm()) {
        return;
    }
    let rho = 1.0 / sy;
    let n = s.len();
    let left = DMatrix::identity(n, n) - rho * s * y.transpose();
    let right = DMatrix::identity(n, n) - rho * y * s.transpose();
    *binv = &left * &*binv * right + rho * s * s.transpose();
}

/// Near an optimum the change in ℓ from a good step falls below the
/// rounding error of the sum; such a step is still taken when it shrinks
/// the gradient.
fn accept_within_noise(f: f64, fc: f64, sg: f64, sg_cand: f64) -> bool {
    f - fc <= 1e-11 * f.abs().max(1.0) && sg_cand < sg
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Newton–Raphson with step halving. Falls back to a BFGS direction built
/// from the accepted steps when the Hessian is not negative definite.
pub fn newton<O: Objective>(
    obj: &mut O,
    theta0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Outcome> {
    let n = theta0.len();
    let mut theta = theta0;
    let (mut f, mut g) = obj.value_grad(&theta);
    if !f.is_finite() {
        return Err(Error::Estimation("log-likelihood not finite at start".into()));
    }
    let mut binv = DMatrix::<f64>::identity(n, n);
    for iter in 0..max_iter {
        if scaled_gradient(&theta, &g, f) <= tol {
            return Ok(Outcome {
                theta,
                loglik: f,
                gradient: g,
                iterations: iter,
                converged: true,
            });
        }
        let neg_h = obj.hessian(&theta).map(|h| -h);
        let dir = match neg_h.and_then(|m| m.cholesky()) {
            Some(ch) => ch.solve(&g),
            None => {
                log::debug!("Hessian not negative definite at iteration {iter}; quasi-Newton step");
                &binv * &g
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand = &theta + step * &dir;
            obj.project(&mut cand);
            let (fc, gc) = obj.value_grad(&cand);
            let fc = finite_or_neg_inf(fc);
            if fc >= f
                || accept_within_noise(f, fc, scaled_gradient(&theta, &g, f), scaled_gradient(&cand, &gc, fc))
            {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            // No ascent possible in floating point; accept as converged only
            // if the gradient is already small.
            let converged = scaled_gradient(&theta, &g, f) <= tol.max(1e-6);
            return Ok(Outcome {
                theta,
                loglik: f,
                gradient: g,
                iterations: iter,
                converged,
            });
        };
        let s = &cand - &theta;
        bfgs_update(&mut binv, &s, &(&g - &gc));
        obj.after_step(&cand, &s)?;
        theta = cand;
        f = fc;
        g = gc;
    }
    let converged = scaled_gradient(&theta, &g, f) <= tol;
    Ok(Outcome {
        theta,
        loglik: f,
        gradient: g,
        iterations: max_iter,
        converged,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub gtol: f64,
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-6,
            ftol: 1e-10,
            max_iter: 500,
        }
    }
}

/// BFGS ascent with Armijo backtracking. `binv0` approximates the inverse
/// of the negative Hessian at `theta0`.
pub fn bfgs<O: Objective>(
    obj: &mut O,
    theta0: DVector<f64>,
    binv0: DMatrix<f64>,
    opts: BfgsOptions,
) -> Result<Outcome> {
    let n = theta0.len();
    let mut theta = theta0;
    let (mut f, mut g) = obj.value_grad(&theta);
    if !f.is_finite() {
        return Err(Error::Estimation("log-likelihood not finite at start".into()));
    }
    let mut binv = binv0;
    let mut last_change = f64::INFINITY;
    let mut was_reset = false;
    for iter in 0..opts.max_iter {
        let sg = scaled_gradient(&theta, &g, f);
        if sg <= opts.gtol && last_change <= opts.ftol {
            return Ok(Outcome {
                theta,
                loglik: f,
                gradient: g,
                iterations: iter,
                converged: true,
            });
        }
        let mut dir = &binv * &g;
        let mut slope = g.dot(&dir);
        if !(slope > 0.0) {
            binv = DMatrix::identity(n, n) / g.norm().max(1.0);
            dir = &binv * &g;
            slope = g.dot(&dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand = &theta + step * &dir;
            obj.project(&mut cand);
            let (fc, gc) = obj.value_grad(&cand);
            let fc = finite_or_neg_inf(fc);
            if fc >= f + 1e-4 * step * slope
                || accept_within_noise(f, fc, sg, scaled_gradient(&cand, &gc, fc))
            {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            if sg <= opts.gtol {
                return Ok(Outcome {
                    theta,
                    loglik: f,
                    gradient: g,
                    iterations: iter,
                    converged: true,
                });
            }
            if was_reset {
                return Ok(Outcome {
                    theta,
                    loglik: f,
                    gradient: g,
                    iterations: iter,
                    converged: false,
                });
            }
            binv = DMatrix::identity(n, n) / g.norm().max(1.0);
            was_reset = true;
            continue;
        };
        was_reset = false;
        let s = &cand - &theta;
        bfgs_update(&mut binv, &s, &(&g - &gc));
        obj.after_step(&cand, &s)?;
        last_change = (fc - f).abs() / f.abs().max(1.0);
        theta = cand;
        f = fc;
        g = gc;
    }
    let converged = scaled_gradient(&theta, &g, f) <= opts.gtol && last_change <= opts.ftol;
    Ok(Outcome {
        theta,
        loglik: f,
        gradient: g,
        iterations: opts.max_iter,
        converged,
    })
}

/// Hessian by central differences of the analytic gradient, symmetrized.
pub fn numeric_hessian<O: Objective>(obj: &mut O, theta: &DVector<f64>) -> DMatrix<f64> {
    let n = theta.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let step = 1e-5 * theta[j].abs().max(1.0);
        let mut up = theta.clone();
        up[j] += step;
        let mut down = theta.clone();
        down[j] -= step;
        let (_, gu) = obj.value_grad(&up);
        let (_, gd) = obj.value_grad(&down);
        let col = (gu - gd) / (2.0 * step);
        h.set_column(j, &col);
    }
    (&h + h.transpose()) * 0.5
}

/// Inverse of the negative Hessian. Falls back to a pseudo-inverse over the
/// positive eigenvalues when the information matrix is singular; the second
/// value is `false` in that case.
pub fn covariance_from_hessian(hessian: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let info = -hessian;
    if let Some(ch) = info.clone().cholesky() {
        let inv = ch.inverse();
        return ((&inv + inv.transpose()) * 0.5, true);
    }
    let eig = info.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let mut inv_vals = eig.eigenvalues.clone();
    for v in inv_vals.iter_mut() {
        *v = if *v > 1e-12 * max { 1.0 / *v } else { 0.0 };
    }
    let v = &eig.eigenvectors;
    let inv = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    (inv, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Concave quadratic with known maximizer.
    struct Quad {
        a: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl Objective for Quad {
        fn value_grad(&mut self, t: &DVector<f64>) -> (f64, DVector<f64>) {
            let d = t - &self.b;
            let ad = &self.a * &d;
            (-0.5 * d.dot(&ad) - 3.0, -ad)
        }
        fn hessian(&mut self, _: &DVector<f64>) -> Option<DMatrix<f64>> {
            Some(-self.a.clone())
        }
    }

    fn quad() -> Quad {
        Quad {
            a: DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]),
            b: DVector::from_vec(vec![1.0, -2.0, 0.5]),
        }
    }

    #[test]
    fn newton_solves_quadratic_in_one_step() {
        let mut q = quad();
        let out = newton(&mut q, DVector::zeros(3), 1e-12, 50).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert!((out.theta - &q.b).amax() < 1e-12);
    }

    #[test]
    fn bfgs_solves_quadratic() {
        let mut q = quad();
        let out = bfgs(&mut q, DVector::zeros(3), DMatrix::identity(3, 3), BfgsOptions::default())
            .unwrap();
        assert!(out.converged);
        assert!((out.theta - &q.b).amax() < 1e-5);
    }

    #[test]
    fn numeric_hessian_recovers_quadratic() {
        let mut q = quad();
        let h = numeric_hessian(&mut q, &DVector::from_vec(vec![0.3, 0.1, -0.2]));
        assert!((h + &q.a).amax() < 1e-8);
        let (v, ok) = covariance_from_hessian(&(-q.a.clone()));
        assert!(ok);
        assert!((v * &q.a - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_on_singular_information() {
        let h = -DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let (v, ok) = covariance_from_hessian(&h);
        assert!(!ok);
        assert!((v[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(v[(1, 1)], 0.0);
    }
}
