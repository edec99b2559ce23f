//! Univariate and bivariate standard normal building blocks.
//!
//! The rectangle probabilities follow Genz's refinement of the
//! Drezner–Wesolowsky method: Gauss–Legendre quadrature of Plackett's
//! identity for |ρ| < 0.925 and an asymptotic expansion around the singular
//! ρ = ±1 limit otherwise. Accuracy is close to double precision everywhere.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Probabilities below this value are clamped before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

const TWO_PI: f64 = 2.0 * PI;

/// Error correlation with |ρ| < 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho.abs() < 1.0 {
            Ok(Self(rho))
        } else {
            Err(Error::Domain(format!(
                "correlation must lie strictly inside (-1, 1), got {rho}"
            )))
        }
    }

    /// Correlation from its Fisher z transform. Saturates just inside ±1
    /// when `tanh` rounds to the boundary.
    pub fn from_athrho(athrho: f64) -> Result<Self> {
        if !athrho.is_finite() {
            return Err(Error::Domain(format!("athrho must be finite, got {athrho}")));
        }
        let rho = athrho.tanh();
        Ok(Self(rho.clamp(-MAX_ABS_RHO, MAX_ABS_RHO)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Largest |ρ| representable strictly below one.
const MAX_ABS_RHO: f64 = 1.0 - f64::EPSILON / 2.0;

impl TryFrom<f64> for Correlation {
    type Error = Error;
    fn try_from(rho: f64) -> Result<Self> {
        Self::new(rho)
    }
}

impl From<Correlation> for f64 {
    fn from(c: Correlation) -> f64 {
        c.0
    }
}

/// The four (y1, y2) cell probabilities of a bivariate probit observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantProbs {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl QuadrantProbs {
    pub fn cell(&self, y1: bool, y2: bool) -> f64 {
        match (y1, y2) {
            (true, true) => self.p11,
            (true, false) => self.p10,
            (false, true) => self.p01,
            (false, false) => self.p00,
        }
    }

    pub fn total(&self) -> f64 {
        self.p11 + self.p10 + self.p01 + self.p00
    }
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (TWO_PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the accurate CDF, on the tail that avoids cancellation
    let pdf = norm_pdf(x);
    if pdf == 0.0 || !x.is_finite() {
        return Ok(x);
    }
    let resid = if x < 0.0 {
        norm_cdf(x) - p
    } else {
        (1.0 - p) - norm_cdf(-x)
    };
    let step = if x < 0.0 { resid / pdf } else { -resid / pdf };
    Ok(x - step)
}

/// `φ(x) / Φ(x)`, stable far into the lower tail.
pub fn inverse_mills(x: f64) -> f64 {
    if x > -30.0 {
        norm_pdf(x) / norm_cdf(x)
    } else {
        // Laplace continued fraction t + 1/(t + 2/(t + 3/(t + ...))), t = -x
        let t = -x;
        let mut tail = t;
        for k in (1..=40).rev() {
            tail = t + k as f64 / tail;
        }
        tail
    }
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // Φ(x) = φ(x) / λ(x)
        -0.5 * x * x - 0.5 * TWO_PI.ln() - inverse_mills(x).ln()
    }
}

pub fn safe_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// Bivariate standard normal density with correlation `rho`.
pub fn bvn_pdf(z1: f64, z2: f64, rho: Correlation) -> Result<f64> {
    if !z1.is_finite() || !z2.is_finite() {
        return Err(Error::Domain(format!(
            "density arguments must be finite, got ({z1}, {z2})"
        )));
    }
    Ok(bvn_pdf_raw(z1, z2, rho.value()))
}

pub(crate) fn bvn_pdf_raw(z1: f64, z2: f64, r: f64) -> f64 {
    let one_minus = (1.0 - r) * (1.0 + r);
    let q = (z1 * z1 + z2 * z2 - 2.0 * r * z1 * z2) / one_minus;
    (-0.5 * q).exp() / (TWO_PI * one_minus.sqrt())
}

/// `P[Z1 ≤ h, Z2 ≤ k]` for standard normals with correlation `rho`.
/// Either limit may be infinite.
pub fn bvn_cdf(h: f64, k: f64, rho: Correlation) -> Result<f64> {
    if h.is_nan() || k.is_nan() {
        return Err(Error::Domain("bivariate CDF limits must not be NaN".into()));
    }
    Ok(bvn_cdf_raw(h, k, rho.value()))
}

/// Unchecked variant of [`bvn_cdf`] for the likelihood hot loops.
#[inline]
pub(crate) fn bvn_cdf_raw(h: f64, k: f64, r: f64) -> f64 {
    bvnu(-h, -k, r)
}

/// Below this the rectangle probability is recomputed in log space.
const LN_PATH_BELOW: f64 = 1e-7;

/// `ln P[Z1 ≤ h, Z2 ≤ k]`, keeping relative accuracy where the probability
/// is tiny or underflows.
pub fn ln_bvn_cdf(h: f64, k: f64, rho: Correlation) -> f64 {
    ln_bvn_cdf_raw(h, k, rho.value())
}

pub(crate) fn ln_bvn_cdf_raw(h: f64, k: f64, r: f64) -> f64 {
    if h.is_nan() || k.is_nan() {
        return f64::NAN;
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if h == f64::INFINITY {
        return ln_norm_cdf(k);
    }
    if k == f64::INFINITY {
        return ln_norm_cdf(h);
    }
    if r == 0.0 {
        return ln_norm_cdf(h) + ln_norm_cdf(k);
    }
    if (1.0 - r) * (1.0 + r) == 0.0 {
        return if r > 0.0 {
            ln_norm_cdf(h.min(k))
        } else {
            bvn_cdf_raw(h, k, r).ln()
        };
    }
    let p = bvn_cdf_raw(h, k, r);
    if p >= LN_PATH_BELOW {
        return p.ln();
    }
    ln_bvn_tail(h, k, r)
}

/// `ln ∫_{-∞}^{h} φ(x) Φ((k − ρx)/s) dx` with `s = √(1 − ρ²)`. The integrand
/// is log-concave, so it is integrated around its mode on the log scale.
fn ln_bvn_tail(h: f64, k: f64, r: f64) -> f64 {
    let s = ((1.0 - r) * (1.0 + r)).sqrt();
    let c = r / s;
    let g = |x: f64| -0.5 * x * x - 0.5 * TWO_PI.ln() + ln_norm_cdf((k - r * x) / s);
    let dg = |x: f64| -x - c * inverse_mills((k - r * x) / s);
    let d2g = |x: f64| {
        let z = (k - r * x) / s;
        let lam = inverse_mills(z);
        -1.0 - c * c * lam * (z + lam)
    };

    // mode on (-∞, h]
    let mode = if dg(h) >= 0.0 {
        h
    } else {
        let mut hi = h;
        let mut step = 1.0;
        let mut lo = h - step;
        while dg(lo) < 0.0 {
            hi = lo;
            step *= 2.0;
            lo = h - step;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let d = dg(x);
            if d > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - d / d2g(x);
            x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * x.abs().max(1.0) || d.abs() < 1e-14 {
                break;
            }
        }
        x
    };
    let g_max = g(mode);
    let curvature = (-d2g(mode)).sqrt();
    let scale = 1.0 / curvature.max(dg(mode).abs());

    // Panels widen geometrically away from the mode, so a cliff of width
    // `s` next to the mode and a slow Gaussian flank are both resolved. Each
    // side stops once the integrand is e^-50 below its peak.
    const DROP: f64 = 50.0;
    let panel = |lo: f64, hi: f64| -> f64 {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut acc = 0.0;
        for (&wi, &xi) in GL20_W.iter().zip(&GL20_X) {
            acc += wi * ((g(mid - half * xi) - g_max).exp() + (g(mid + half * xi) - g_max).exp());
        }
        acc * half
    };
    let mut sum = 0.0;
    let mut inner = 0.0;
    let mut outer = scale;
    for _ in 0..200 {
        sum += panel(mode - outer, mode - inner);
        if g(mode - outer) < g_max - DROP {
            break;
        }
        inner = outer;
        outer *= 2.0;
    }
    if mode < h {
        let (mut inner, mut outer) = (0.0, scale);
        for _ in 0..200 {
            let stop = mode + outer >= h;
            let hi = (mode + outer).min(h);
            sum += panel(mode + inner, hi);
            if stop || g(hi) < g_max - DROP {
                break;
            }
            inner = outer;
            outer *= 2.0;
        }
    }
    g_max + sum.ln()
}

/// Cell probabilities for systematic utilities `v1`, `v2` under unit error
/// variances: `p11 = P[ε1 > -v1, ε2 > -v2]`, and so on.
pub fn quadrant_probs(v1: f64, v2: f64, rho: Correlation) -> Result<QuadrantProbs> {
    if !v1.is_finite() || !v2.is_finite() {
        return Err(Error::Domain(format!(
            "systematic utilities must be finite, got ({v1}, {v2})"
        )));
    }
    let r = rho.value();
    Ok(QuadrantProbs {
        p11: bvn_cdf_raw(v1, v2, r),
        p10: bvn_cdf_raw(v1, -v2, -r),
        p01: bvn_cdf_raw(-v1, v2, -r),
        p00: bvn_cdf_raw(-v1, -v2, r),
    })
}

// Gauss–Legendre half-rules (weights, abscissae on (0, 1)).
const GL6_W: [f64; 3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904];
const GL6_X: [f64; 3] = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970];
const GL12_W: [f64; 6] = [
    0.04717533638651177,
    0.1069393259953183,
    0.1600783285433464,
    0.2031674267230659,
    0.2334925365383547,
    0.2491470458134029,
];
const GL12_X: [f64; 6] = [
    0.9815606342467191,
    0.9041172563704750,
    0.7699026741943050,
    0.5873179542866171,
    0.3678314989981802,
    0.1252334085114692,
];
const GL20_W: [f64; 10] = [
    0.01761400713915212,
    0.04060142980038694,
    0.06267204833410906,
    0.08327674157670475,
    0.1019301198172404,
    0.1181945319615184,
    0.1316886384491766,
    0.1420961093183821,
    0.1491729864726037,
    0.1527533871307259,
];
const GL20_X: [f64; 10] = [
    0.9931285991850949,
    0.9639719272779138,
    0.9122344282513259,
    0.8391169718222188,
    0.7463319064601508,
    0.6360536807265150,
    0.5108670019508271,
    0.3737060887154196,
    0.2277858511416451,
    0.07652652113349733,
];

fn gauss_rule(abs_r: f64) -> (&'static [f64], &'static [f64]) {
    if abs_r < 0.3 {
        (&GL6_W, &GL6_X)
    } else if abs_r < 0.75 {
        (&GL12_W, &GL12_X)
    } else {
        (&GL20_W, &GL20_X)
    }
}

/// Upper orthant `P[Z1 > dh, Z2 > dk]`.
fn bvnu(dh: f64, dk: f64, r: f64) -> f64 {
    if dh == f64::INFINITY || dk == f64::INFINITY {
        return 0.0;
    }
    if dh == f64::NEG_INFINITY {
        return if dk == f64::NEG_INFINITY {
            1.0
        } else {
            norm_cdf(-dk)
        };
    }
    if dk == f64::NEG_INFINITY {
        return norm_cdf(-dh);
    }
    if r == 0.0 {
        return norm_cdf(-dh) * norm_cdf(-dk);
    }

    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let (w, x) = gauss_rule(r.abs());
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for (&wi, &xi) in w.iter().zip(x) {
            for node in [1.0 - xi, 1.0 + xi] {
                let sn = (asr * node).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (bvn * asr / TWO_PI + norm_cdf(-h) * norm_cdf(-k)).clamp(0.0, 1.0);
    }

    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_sq = (1.0 - r) * (1.0 + r);
        let mut a = a_sq.sqrt();
        let b_sq = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 80.0;
        let asr = -0.5 * (b_sq / a_sq + hk);
        if asr > -100.0 {
            bvn = a
                * asr.exp()
                * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq) / 3.0 + c * d * a_sq * a_sq);
        }
        if hk > -100.0 {
            let b = b_sq.sqrt();
            let sp = TWO_PI.sqrt() * norm_cdf(-b / a);
            bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * b_sq * (1.0 - d * b_sq) / 3.0);
        }
        a *= 0.5;
        let mut sum = 0.0;
        for (&wi, &xi) in w.iter().zip(x) {
            for node in [1.0 - xi, 1.0 + xi] {
                let xs = (a * node) * (a * node);
                let asr = -0.5 * (b_sq / xs + hk);
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                    sum += wi * asr.exp() * (sp - ep);
                }
            }
        }
        bvn = (a * sum - bvn) / TWO_PI;
    }
    if r > 0.0 {
        bvn += norm_cdf(-h.max(k));
    } else if h >= k {
        bvn = -bvn;
    } else {
        let l = if h < 0.0 {
            norm_cdf(k) - norm_cdf(h)
        } else {
            norm_cdf(-h) - norm_cdf(-k)
        };
        bvn = l - bvn;
    }
    bvn.clamp(0.0, 1.0)
}
