//! Compensating surplus in money and labor, shadow-wage conversion and
//! total annual welfare.
//!
//! Under linear utility the compensating surplus of a payment vehicle is the
//! bid that makes the respondent indifferent: `−v_nobid / β_bid`, where
//! `v_nobid` is the equation's index without the bid term. In the labor
//! equation the index keeps `η·y1` at the respondent's observed cash
//! response.

use std::fmt::Write as _;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::biprobit::BiprobitFit;
use crate::data::{mean_sd, vars, Dataset, SurveyRecord};
use crate::effects::FitRef;
use crate::error::{Error, Result};
use crate::probit::FitResult;

pub const DEFAULT_SHADOW_RATIO: f64 = 0.3863;
pub const DEFAULT_SIM_DRAWS: usize = 5000;
pub const DEFAULT_SEED: u64 = 12345;

/// Months per year, used to annualize monthly labor days.
const MONTHS: f64 = 12.0;

/// Daily shadow wage band, ETB per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowWage {
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub mean_w: f64,
}

/// Shadow wages as a fixed fraction of the slack and peak market wages.
pub fn shadow_wage(wage_slack: f64, wage_peak: f64, ratio: f64) -> Result<ShadowWage> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Domain(format!("shadow ratio must lie in (0, 1], got {ratio}")));
    }
    if !(wage_slack > 0.0 && wage_peak > 0.0) || !wage_slack.is_finite() || !wage_peak.is_finite() {
        return Err(Error::Domain(format!(
            "wages must be positive, got slack {wage_slack} and peak {wage_peak}"
        )));
    }
    if wage_slack > wage_peak {
        return Err(Error::Domain(format!(
            "slack wage {wage_slack} exceeds peak wage {wage_peak}"
        )));
    }
    let lower = ratio * wage_slack;
    let upper = ratio * wage_peak;
    Ok(ShadowWage {
        ratio,
        lower,
        upper,
        mean_w: 0.5 * (lower + upper),
    })
}

/// Labor value of `annual_days` at a daily wage.
pub fn labor_value(annual_days: f64, wage: f64) -> f64 {
    annual_days * wage
}

/// Combined money and labor surplus with the slack-only and peak-only
/// variants of the labor value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvTotal {
    pub total: f64,
    pub annual_days: f64,
    pub labor_value: f64,
    pub labor_value_slack: f64,
    pub labor_value_peak: f64,
}

/// `cv_m + 12·cv_l·mean_w`, ETB per year.
pub fn cv_total(cv_m: f64, cv_l_monthly: f64, sw: &ShadowWage) -> CvTotal {
    let annual_days = MONTHS * cv_l_monthly;
    let average = annual_days * sw.mean_w;
    CvTotal {
        total: cv_m + average,
        annual_days,
        labor_value: average,
        labor_value_slack: labor_value(annual_days, sw.lower),
        labor_value_peak: labor_value(annual_days, sw.upper),
    }
}

/// One payment vehicle's coefficients with the position of its bid.
#[derive(Debug, Clone)]
struct Vehicle {
    names: Vec<String>,
    coefs: Vec<f64>,
    bid: usize,
}

impl Vehicle {
    fn new(fit: FitRef<'_>, equation: u8) -> Result<Self> {
        let eq = fit.equation(equation)?;
        let bid_name = if equation == 1 { vars::BID_CASH } else { vars::BID_LABOR };
        let bid = eq.names.iter().position(|n| n == bid_name).ok_or_else(|| {
            Error::Spec(format!("equation {equation} has no `{bid_name}` coefficient"))
        })?;
        Ok(Self {
            names: eq.names,
            coefs: eq.coefs,
            bid,
        })
    }

    fn values(&self, rec: &SurveyRecord) -> Result<Vec<f64>> {
        self.names
            .iter()
            .map(|n| {
                rec.value(n).ok_or_else(|| {
                    Error::InsufficientData(format!("record `{}` lacks `{n}`", rec.id))
                })
            })
            .collect()
    }

    fn slope(&self, coefs: &[f64]) -> Result<f64> {
        let b = coefs[self.bid];
        if b >= 0.0 || !b.is_finite() {
            return Err(Error::BidSign {
                name: self.names[self.bid].clone(),
                value: b,
            });
        }
        Ok(b)
    }

    /// `−v_nobid / β_bid` for regressor values `x`.
    fn cv(&self, coefs: &[f64], x: &[f64]) -> Result<f64> {
        let b = self.slope(coefs)?;
        let mut v = 0.0;
        for (j, (c, xj)) in coefs.iter().zip(x).enumerate() {
            if j != self.bid {
                v += c * xj;
            }
        }
        Ok(-v / b)
    }
}

/// Money surplus, ETB per year. Needs the cash-equation bid coefficient to
/// be negative.
pub fn cv_money<'a>(fit: impl Into<FitRef<'a>>, record: &SurveyRecord) -> Result<f64> {
    let v = Vehicle::new(fit.into(), 1)?;
    v.cv(&v.coefs, &v.values(record)?)
}

/// Labor surplus, days per month.
pub fn cv_labor<'a>(fit: impl Into<FitRef<'a>>, record: &SurveyRecord) -> Result<f64> {
    let v = Vehicle::new(fit.into(), 2)?;
    v.cv(&v.coefs, &v.values(record)?)
}

/// The models supplying the cash and labor equations.
#[derive(Debug, Clone, Copy)]
pub enum WelfareFit<'a> {
    Joint(&'a BiprobitFit),
    Separate {
        cash: &'a FitResult,
        labor: &'a FitResult,
    },
}

impl<'a> From<&'a BiprobitFit> for WelfareFit<'a> {
    fn from(f: &'a BiprobitFit) -> Self {
        WelfareFit::Joint(f)
    }
}

impl<'a> WelfareFit<'a> {
    fn parts(&self) -> (FitRef<'a>, FitRef<'a>) {
        match *self {
            WelfareFit::Joint(f) => (FitRef::Biprobit(f), FitRef::Biprobit(f)),
            WelfareFit::Separate { cash, labor } => (FitRef::Probit(cash), FitRef::Probit(labor)),
        }
    }

    fn converged(&self) -> bool {
        match self {
            WelfareFit::Joint(f) => f.converged,
            WelfareFit::Separate { cash, labor } => cash.converged && labor.converged,
        }
    }

    /// Stacked (cash, labor) coefficients and their joint covariance. The
    /// separate case assumes independent equations.
    fn sampling_distribution(&self, cash: &Vehicle, labor: &Vehicle) -> (DVector<f64>, DMatrix<f64>) {
        let (p1, p2) = (cash.coefs.len(), labor.coefs.len());
        let mean = DVector::from_iterator(p1 + p2, cash.coefs.iter().chain(&labor.coefs).copied());
        let cov = match *self {
            WelfareFit::Joint(f) => f.vcov.view((0, 0), (p1 + p2, p1 + p2)).into_owned(),
            WelfareFit::Separate { cash, labor } => {
                let mut m = DMatrix::zeros(p1 + p2, p1 + p2);
                m.view_mut((0, 0), (p1, p1)).copy_from(&cash.vcov);
                m.view_mut((p1, p1), (p2, p2)).copy_from(&labor.vcov);
                m
            }
        };
        (mean, cov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WageMode {
    /// One shadow wage for everyone, from sample-mean wages.
    Global,
    /// Each respondent's own wages, falling back to the global band.
    #[default]
    Respondent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareOptions {
    pub shadow_ratio: f64,
    pub wage_mode: WageMode,
    /// Replace negative individual surpluses by zero.
    pub truncate_negative: bool,
    /// Parameter draws for simulated intervals; 0 disables them.
    pub sim_draws: usize,
    pub seed: u64,
    /// Market (slack, peak) wages overriding the sample means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_wages: Option<(f64, f64)>,
}

impl Default for WelfareOptions {
    fn default() -> Self {
        Self {
            shadow_ratio: DEFAULT_SHADOW_RATIO,
            wage_mode: WageMode::Respondent,
            truncate_negative: false,
            sim_draws: 0,
            seed: DEFAULT_SEED,
            global_wages: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentWelfare {
    pub id: String,
    /// ETB per year.
    pub cv_money: f64,
    /// Days per month.
    pub cv_labor: f64,
    pub cv_labor_annual_days: f64,
    /// Shadow wage applied to this respondent, ETB per day.
    pub mean_w: f64,
    pub labor_value: f64,
    pub labor_value_slack: f64,
    pub labor_value_peak: f64,
    pub cv_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<[f64; 2]>,
}

impl SummaryStat {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let (mean, sd) = mean_sd(&v);
        Self { mean, sd, ci: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareSummary {
    pub wtp: SummaryStat,
    pub wtc_monthly_days: SummaryStat,
    pub wtc_annual_days: SummaryStat,
    pub labor_value_slack: SummaryStat,
    pub labor_value_peak: SummaryStat,
    pub labor_value_average: SummaryStat,
    pub total: SummaryStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub options: WelfareOptions,
    pub n: usize,
    /// Band from the global (sample-mean or supplied) wages.
    pub shadow_wage: ShadowWage,
    /// Respondents valued at the global band in respondent mode.
    pub wage_fallbacks: usize,
    pub summary: WelfareSummary,
    pub cash_share: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cash_share_ci: Option<[f64; 2]>,
    /// Parameter draws discarded because a bid coefficient was not negative.
    pub invalid_draws: usize,
    pub warnings: Vec<String>,
    pub per_respondent: Vec<RespondentWelfare>,
}

/// Regressor values and wage band of one respondent.
struct Prepared {
    id: String,
    x_cash: Vec<f64>,
    x_labor: Vec<f64>,
    sw: ShadowWage,
}

fn evaluate(
    cash: &Vehicle,
    labor: &Vehicle,
    cash_coefs: &[f64],
    labor_coefs: &[f64],
    rows: &[Prepared],
    truncate: bool,
) -> Result<Vec<RespondentWelfare>> {
    rows.iter()
        .map(|r| {
            let mut cv_m = cash.cv(cash_coefs, &r.x_cash)?;
            let mut cv_l = labor.cv(labor_coefs, &r.x_labor)?;
            if truncate {
                cv_m = cv_m.max(0.0);
                cv_l = cv_l.max(0.0);
            }
            let t = cv_total(cv_m, cv_l, &r.sw);
            Ok(RespondentWelfare {
                id: r.id.clone(),
                cv_money: cv_m,
                cv_labor: cv_l,
                cv_labor_annual_days: t.annual_days,
                mean_w: r.sw.mean_w,
                labor_value: t.labor_value,
                labor_value_slack: t.labor_value_slack,
                labor_value_peak: t.labor_value_peak,
                cv_total: t.total,
            })
        })
        .collect()
}

fn summarize(per: &[RespondentWelfare]) -> WelfareSummary {
    WelfareSummary {
        wtp: SummaryStat::of(per.iter().map(|r| r.cv_money)),
        wtc_monthly_days: SummaryStat::of(per.iter().map(|r| r.cv_labor)),
        wtc_annual_days: SummaryStat::of(per.iter().map(|r| r.cv_labor_annual_days)),
        labor_value_slack: SummaryStat::of(per.iter().map(|r| r.labor_value_slack)),
        labor_value_peak: SummaryStat::of(per.iter().map(|r| r.labor_value_peak)),
        labor_value_average: SummaryStat::of(per.iter().map(|r| r.labor_value)),
        total: SummaryStat::of(per.iter().map(|r| r.cv_total)),
    }
}

fn mean_wages(ds: &Dataset, rows: &[usize]) -> Option<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|&i| {
            let r = &ds.records()[i];
            Some((r.wage_slack?, r.wage_peak?))
        })
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    Some((
        pairs.iter().map(|p| p.0).sum::<f64>() / n,
        pairs.iter().map(|p| p.1).sum::<f64>() / n,
    ))
}

/// Per-respondent surpluses over the estimation sample, their summary and
/// the cash share of total welfare.
pub fn welfare_report<'a>(
    fit: impl Into<WelfareFit<'a>>,
    ds: &Dataset,
    opts: &WelfareOptions,
) -> Result<WelfareReport> {
    let fit = fit.into();
    let (cash_fit, labor_fit) = fit.parts();
    let cash = Vehicle::new(cash_fit, 1)?;
    let labor = Vehicle::new(labor_fit, 2)?;
    let mut warnings = Vec::new();
    if !fit.converged() {
        warnings.push("welfare computed from a fit that did not converge".to_string());
    }

    let mut rows = cash_fit.sample_rows(ds)?;
    if let WelfareFit::Separate { labor: l, .. } = fit {
        let labor_rows = FitRef::Probit(l).sample_rows(ds)?;
        rows.retain(|i| labor_rows.binary_search(i).is_ok());
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no complete records for welfare".into()));
    }

    let (slack, peak) = opts
        .global_wages
        .or_else(|| mean_wages(ds, &rows))
        .ok_or_else(|| {
            Error::Config("no wage data: supply wage columns or global wages".into())
        })?;
    let global = shadow_wage(slack, peak, opts.shadow_ratio)?;

    let mut fallbacks = 0;
    let prepared = rows
        .iter()
        .map(|&i| {
            let rec = &ds.records()[i];
            let sw = match opts.wage_mode {
                WageMode::Global => global,
                WageMode::Respondent => match (rec.wage_slack, rec.wage_peak) {
                    (Some(s), Some(p)) => shadow_wage(s, p, opts.shadow_ratio).unwrap_or_else(|_| {
                        fallbacks += 1;
                        global
                    }),
                    _ => {
                        fallbacks += 1;
                        global
                    }
                },
            };
            Ok(Prepared {
                id: rec.id.clone(),
                x_cash: cash.values(rec)?,
                x_labor: labor.values(rec)?,
                sw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if fallbacks > 0 && opts.wage_mode == WageMode::Respondent {
        warnings.push(format!(
            "{fallbacks} respondents lack usable wages and were valued at the global band"
        ));
    }

    let per = evaluate(&cash, &labor, &cash.coefs, &labor.coefs, &prepared, opts.truncate_negative)?;
    let mut summary = summarize(&per);
    let cash_share = summary.wtp.mean / summary.total.mean;

    let mut cash_share_ci = None;
    let mut invalid_draws = 0;
    if opts.sim_draws > 0 {
        let (mean, cov) = fit.sampling_distribution(&cash, &labor);
        let draws = simulate_summaries(&cash, &labor, &prepared, opts, &mean, &cov);
        let valid: Vec<(WelfareSummary, f64)> = draws.into_iter().flatten().collect();
        invalid_draws = opts.sim_draws - valid.len();
        if invalid_draws > 0 {
            warnings.push(format!(
                "{invalid_draws} of {} parameter draws had a nonnegative bid coefficient",
                opts.sim_draws
            ));
        }
        if valid.len() >= 2 {
            let interval = |f: &dyn Fn(&(WelfareSummary, f64)) -> f64| -> Option<[f64; 2]> {
                let mut data = Data::new(valid.iter().map(f).collect::<Vec<_>>());
                Some([data.quantile(0.025), data.quantile(0.975)])
            };
            summary.wtp.ci = interval(&|d| d.0.wtp.mean);
            summary.wtc_monthly_days.ci = interval(&|d| d.0.wtc_monthly_days.mean);
            summary.wtc_annual_days.ci = interval(&|d| d.0.wtc_annual_days.mean);
            summary.labor_value_slack.ci = interval(&|d| d.0.labor_value_slack.mean);
            summary.labor_value_peak.ci = interval(&|d| d.0.labor_value_peak.mean);
            summary.labor_value_average.ci = interval(&|d| d.0.labor_value_average.mean);
            summary.total.ci = interval(&|d| d.0.total.mean);
            cash_share_ci = interval(&|d| d.1);
        }
    }

    Ok(WelfareReport {
        options: opts.clone(),
        n: per.len(),
        shadow_wage: global,
        wage_fallbacks: fallbacks,
        summary,
        cash_share,
        cash_share_ci,
        invalid_draws,
        warnings,
        per_respondent: per,
    })
}

/// Summaries under coefficient vectors drawn from `N(mean, cov)`. Draw `d`
/// uses its own stream, so results do not depend on scheduling.
fn simulate_summaries(
    cash: &Vehicle,
    labor: &Vehicle,
    rows: &[Prepared],
    opts: &WelfareOptions,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Vec<Option<(WelfareSummary, f64)>> {
    let eig = SymmetricEigen::new(cov.clone());
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&root);
    let p1 = cash.coefs.len();
    let dim = mean.len();
    (0..opts.sim_draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(d as u64);
            let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let theta = mean + &factor * z;
            let (c, l) = theta.as_slice().split_at(p1);
            let per = evaluate(cash, labor, c, l, rows, opts.truncate_negative).ok()?;
            let s = summarize(&per);
            let share = s.wtp.mean / s.total.mean;
            Some((s, share))
        })
        .collect()
}

/// Aligned text table of the mean surpluses, with standard deviations and
/// simulated intervals when present.
pub fn welfare_table(report: &WelfareReport) -> String {
    let s = &report.summary;
    let rows: [(&str, &SummaryStat); 6] = [
        ("WTP (ETB/year)", &s.wtp),
        ("WTC (days/year)", &s.wtc_annual_days),
        ("Slack season WTC (ETB/year)", &s.labor_value_slack),
        ("Peak season WTC (ETB/year)", &s.labor_value_peak),
        ("Average WTC (ETB/year)", &s.labor_value_average),
        ("Total annual WTC (ETB/year)", &s.total),
    ];
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let with_ci = rows.iter().any(|r| r.1.ci.is_some());
    let mut out = String::new();
    let _ = write!(out, "{:<width$}  {:>10}  {:>10}", "", "Mean", "SD");
    if with_ci {
        let _ = write!(out, "  {:>21}", "95% interval");
    }
    out.push('\n');
    for (label, stat) in rows {
        let _ = write!(out, "{label:<width$}  {:>10.2}  {:>10.2}", stat.mean, stat.sd);
        if let Some([lo, hi]) = stat.ci {
            let _ = write!(out, "  [{lo:>9.2}, {hi:>9.2}]");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{:<width$}  {:>9.2}%", "Cash share", 100.0 * report.cash_share);
    let sw = &report.shadow_wage;
    let mode = match report.options.wage_mode {
        WageMode::Global => "global",
        WageMode::Respondent => "respondent",
    };
    let _ = writeln!(
        out,
        "n = {}; shadow ratio {}; shadow wage {:.2}-{:.2} ETB/day; wage mode {mode}",
        report.n, sw.ratio, sw.lower, sw.upper
    );
    out
}

/// Summary means keyed by row label, for machine consumption.
pub fn summary_means(report: &WelfareReport) -> IndexMap<&'static str, f64> {
    let s = &report.summary;
    IndexMap::from([
        ("wtp", s.wtp.mean),
        ("wtc_annual_days", s.wtc_annual_days.mean),
        ("labor_value_slack", s.labor_value_slack.mean),
        ("labor_value_peak", s.labor_value_peak.mean),
        ("labor_value_average", s.labor_value_average.mean),
        ("total", s.total.mean),
        ("cash_share", report.cash_share),
    ])
}
