//! Reference distributions and the common hypothesis-test record.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, StudentsT};

/// Outcome of any hypothesis test. `statistic` and `p_value` are absent for
/// degenerate tests that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: Option<f64>,
    pub df: Vec<f64>,
    pub p_value: Option<f64>,
    pub alpha: f64,
    pub reject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestResult {
    pub fn new(name: &str, statistic: f64, df: Vec<f64>, p_value: f64, alpha: f64) -> Self {
        Self {
            name: name.to_string(),
            statistic: Some(statistic),
            df,
            p_value: Some(p_value),
            alpha,
            reject: p_value < alpha,
            note: None,
        }
    }

    pub fn degenerate(name: &str, note: &str) -> Self {
        Self {
            name: name.to_string(),
            statistic: None,
            df: Vec::new(),
            p_value: None,
            alpha: 0.05,
            reject: false,
            note: Some(note.to_string()),
        }
    }

    pub fn verdict(&self) -> &'static str {
        match self.p_value {
            None => "not computed",
            Some(_) if self.reject => "reject",
            Some(_) => "do not reject",
        }
    }
}

/// Upper tail of χ²(df).
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive degrees of freedom").sf(x)
}

/// Upper tail of F(d1, d2).
pub fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    FisherSnedecor::new(d1, d2).expect("positive degrees of freedom").sf(x)
}

/// Two-sided p value of a t statistic.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

pub fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}
