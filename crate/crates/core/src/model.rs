//! Equation specifications and the dense design matrices built from them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{vars, Dataset};
use crate::error::{Error, Result};

/// One binary-choice equation: outcome, ordered regressors (a constant is
/// always prepended) and the optional endogenous regressor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endogenous_regressor: Option<String>,
}

impl ModelSpec {
    pub fn new<S: Into<String>>(outcome: S, regressors: &[&str]) -> Self {
        Self {
            outcome: outcome.into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            endogenous_regressor: None,
        }
    }

    pub fn with_endogenous(mut self, name: &str) -> Self {
        self.endogenous_regressor = Some(name.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.regressors {
            if r == vars::CONSTANT {
                return Err(Error::Spec(format!(
                    "`{}` is implicit and must not be listed",
                    vars::CONSTANT
                )));
            }
            if !seen.insert(r.as_str()) {
                return Err(Error::Spec(format!("duplicate regressor `{r}`")));
            }
        }
        if seen.contains(self.outcome.as_str()) {
            return Err(Error::Spec(format!(
                "outcome `{}` appears among its own regressors",
                self.outcome
            )));
        }
        if let Some(e) = &self.endogenous_regressor {
            if !seen.contains(e.as_str()) {
                return Err(Error::Spec(format!(
                    "endogenous regressor `{e}` is not among the regressors"
                )));
            }
        }
        Ok(())
    }

    /// Coefficient names in parameter order, constant first.
    pub fn coef_names(&self) -> Vec<String> {
        std::iter::once(vars::CONSTANT.to_string())
            .chain(self.regressors.iter().cloned())
            .collect()
    }

    pub fn n_coefs(&self) -> usize {
        self.regressors.len() + 1
    }

    fn check_variables(&self, ds: &Dataset) -> Result<()> {
        for v in std::iter::once(&self.outcome).chain(&self.regressors) {
            if !ds.has_variable(v) {
                return Err(Error::UnknownVariable(v.clone()));
            }
        }
        Ok(())
    }
}

/// Indices of records with no missing value in any variable used by `specs`.
pub fn complete_rows(ds: &Dataset, specs: &[&ModelSpec]) -> Result<Vec<usize>> {
    for s in specs {
        s.validate()?;
        s.check_variables(ds)?;
    }
    Ok(ds
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            specs.iter().all(|s| {
                r.value(&s.outcome).is_some() && s.regressors.iter().all(|v| r.value(v).is_some())
            })
        })
        .map(|(i, _)| i)
        .collect())
}

/// Row-major regressor matrix and binary outcome for one equation.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub rows: Vec<usize>,
    /// `rows.len() × names.len()`, row-major.
    pub x: Vec<f64>,
    pub y: Vec<bool>,
}

impl Design {
    pub fn build(spec: &ModelSpec, ds: &Dataset, rows: &[usize]) -> Result<Self> {
        let names = spec.coef_names();
        let p = names.len();
        let mut x = Vec::with_capacity(rows.len() * p);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            let rec = &ds.records()[i];
            let yv = rec.value(&spec.outcome).ok_or_else(|| Error::Validation {
                row: i + 1,
                message: format!("missing outcome `{}`", spec.outcome),
            })?;
            if yv != 0.0 && yv != 1.0 {
                return Err(Error::Validation {
                    row: i + 1,
                    message: format!("outcome `{}` must be binary, got {yv}", spec.outcome),
                });
            }
            y.push(yv == 1.0);
            for name in &names {
                x.push(rec.value(name).ok_or_else(|| Error::Validation {
                    row: i + 1,
                    message: format!("missing regressor `{name}`"),
                })?);
            }
        }
        Ok(Self {
            names,
            rows: rows.to_vec(),
            x,
            y,
        })
    }

    /// Design over every complete record for `spec`.
    pub fn from_dataset(spec: &ModelSpec, ds: &Dataset) -> Result<Self> {
        let rows = complete_rows(ds, &[spec])?;
        Self::build(spec, ds, &rows)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn column_sds(&self) -> Vec<f64> {
        (0..self.p())
            .map(|j| {
                let col: Vec<f64> = (0..self.n()).map(|i| self.row(i)[j]).collect();
                crate::data::mean_sd(&col).1
            })
            .collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Linear index `x_i · coefs`.
    #[inline]
    pub fn index(&self, i: usize, coefs: &[f64]) -> f64 {
        dot(self.row(i), coefs)
    }

    /// Errors unless both outcome classes occur.
    pub fn require_variation(&self, outcome: &str) -> Result<()> {
        let ones = self.y.iter().filter(|&&y| y).count();
        if ones == 0 || ones == self.n() {
            return Err(Error::NoVariation(outcome.to_string()));
        }
        Ok(())
    }

    /// Detects regressors that alone predict the outcome perfectly: a level
    /// of a binary regressor with a single outcome class, or a continuous
    /// regressor whose ranges under y = 0 and y = 1 do not overlap.
    pub fn check_separation(&self) -> Result<()> {
        for j in 1..self.p() {
            let col = (0..self.n()).map(|i| (self.row(i)[j], self.y[i]));
            let mut binary = true;
            let mut seen = [[false; 2]; 2];
            let (mut min1, mut max1, mut min0, mut max0) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for (x, y) in col {
                if x == 0.0 || x == 1.0 {
                    seen[x as usize][usize::from(y)] = true;
                } else {
                    binary = false;
                }
                if y {
                    min1 = min1.min(x);
                    max1 = max1.max(x);
                } else {
                    min0 = min0.min(x);
                    max0 = max0.max(x);
                }
            }
            let separated = if binary {
                seen.iter().any(|level| level[0] != level[1])
            } else {
                max0 < min1 || max1 < min0
            };
            if separated {
                return Err(Error::Separation(self.names[j].clone()));
            }
        }
        Ok(())
    }

    /// Errors when the columns are (numerically) linearly dependent.
    pub fn require_full_rank(&self) -> Result<()> {
        let (n, p) = (self.n(), self.p());
        if n < p {
            return Err(Error::RankDeficient(format!("{n} observations for {p} coefficients")));
        }
        let mut m = nalgebra::DMatrix::from_row_slice(n, p, &self.x);
        for mut col in m.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        let sv = m.singular_values();
        let max = sv.max();
        let min = sv.min();
        if !(max > 0.0) || min / max < 1e-10 {
            return Err(Error::RankDeficient(format!(
                "condition of normalized regressors {:.3e}",
                min / max
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}
