//! Behavioral checks on the survey responses: starting-point bias in the
//! open-ended follow-ups, endowment differences across response patterns,
//! and the response-pattern distribution.

use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::{mean_sd, vars, Dataset, ResponsePattern};
use crate::error::{Error, Result};
use crate::stats::{f_sf, t_quantile, t_two_sided, TestResult};

pub const ALPHA: f64 = 0.05;

/// Which open-ended maximum is grouped by which opening bid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorVehicle {
    /// Maximum WTP by cash bid.
    Cash,
    /// Maximum WTC by labor bid.
    Labor,
    /// Maximum WTC by cash bid.
    Cross,
}

impl AnchorVehicle {
    pub const ALL: [AnchorVehicle; 3] = [Self::Cash, Self::Labor, Self::Cross];

    /// (grouping bid, response variable).
    pub fn variables(self) -> (&'static str, &'static str) {
        match self {
            Self::Cash => (vars::BID_CASH, vars::MAX_WTP),
            Self::Labor => (vars::BID_LABOR, vars::MAX_WTC),
            Self::Cross => (vars::BID_CASH, vars::MAX_WTC),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub bid: f64,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoringReport {
    pub vehicle: AnchorVehicle,
    pub grouping: String,
    pub variable: String,
    pub groups: Vec<GroupMean>,
    /// One-way analysis of variance across the retained groups.
    pub omnibus: TestResult,
    pub warnings: Vec<String>,
}

/// One-way ANOVA. Equal group means give F = 0 and p = 1 even when every
/// group is constant.
pub fn one_way_anova(groups: &[Vec<f64>]) -> TestResult {
    const NAME: &str = "one-way ANOVA";
    let k = groups.len();
    let total: usize = groups.iter().map(Vec::len).sum();
    if k < 2 || total <= k {
        return TestResult::degenerate(NAME, "needs at least two groups and residual degrees of freedom");
    }
    let grand = groups.iter().flatten().sum::<f64>() / total as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let (m, _) = mean_sd(g);
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    let (d1, d2) = ((k - 1) as f64, (total - k) as f64);
    let all_equal_means = groups.iter().all(|g| mean_sd(g).0 == mean_sd(&groups[0]).0);
    let f = if all_equal_means || ssb == 0.0 {
        0.0
    } else if ssw == 0.0 {
        f64::INFINITY
    } else {
        (ssb / d1) / (ssw / d2)
    };
    TestResult::new(NAME, f, vec![d1, d2], f_sf(f, d1, d2), ALPHA)
}

/// Group means of the open-ended maximum by opening bid, with 95% t
/// intervals and an omnibus ANOVA. Groups with fewer than two answers are
/// dropped with a warning.
pub fn anchoring_test(ds: &Dataset, vehicle: AnchorVehicle) -> Result<AnchoringReport> {
    let (bid_var, var) = vehicle.variables();
    let mut pairs: Vec<(f64, f64)> = ds
        .records()
        .iter()
        .filter_map(|r| Some((r.value(bid_var)?, r.value(var)?)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InsufficientData(format!("no records with `{var}`")));
    }
    // sorting both keys makes every sum independent of record order
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut warnings = Vec::new();
    let mut groups = Vec::new();
    let mut values = Vec::new();
    for chunk in pairs.chunk_by(|a, b| a.0 == b.0) {
        let bid = chunk[0].0;
        let v: Vec<f64> = chunk.iter().map(|p| p.1).collect();
        if v.len() < 2 {
            warnings.push(format!("bid {bid}: fewer than 2 observations, group dropped"));
            continue;
        }
        let (mean, sd) = mean_sd(&v);
        let half = t_quantile(0.975, (v.len() - 1) as f64) * sd / (v.len() as f64).sqrt();
        groups.push(GroupMean {
            bid,
            n: v.len(),
            mean,
            sd,
            ci_low: mean - half,
            ci_high: mean + half,
        });
        values.push(v);
    }
    let omnibus = one_way_anova(&values);
    if omnibus.p_value.is_none() {
        warnings.push("fewer than two bid groups: omnibus test not computed".into());
    }
    Ok(AnchoringReport {
        vehicle,
        grouping: bid_var.to_string(),
        variable: var.to_string(),
        groups,
        omnibus,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_a: ResponsePattern,
    pub group_b: ResponsePattern,
    pub variable: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_bonferroni: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternGroup {
    pub pattern: ResponsePattern,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndowmentReport {
    pub variable: String,
    pub groups: Vec<PatternGroup>,
    pub comparisons: Vec<GroupComparison>,
    pub warnings: Vec<String>,
}

/// Welch unequal-variance t test: (t, df, two-sided p).
pub fn welch_t(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return if ma == mb { (0.0, df, 1.0) } else { ((ma - mb).signum() * f64::INFINITY, df, 0.0) };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    (t, df, t_two_sided(t, df))
}

/// Pairwise Welch tests of `variable` between the four response patterns.
/// Patterns with fewer than two records are reported but not compared.
pub fn endowment_comparison(ds: &Dataset, variable: &str, bonferroni: bool) -> Result<EndowmentReport> {
    if !ds.has_variable(variable) {
        return Err(Error::UnknownVariable(variable.to_string()));
    }
    let mut by_pattern: IndexMap<ResponsePattern, Vec<f64>> =
        ResponsePattern::ALL.iter().map(|p| (*p, Vec::new())).collect();
    for r in ds.records() {
        if let Some(v) = r.value(variable) {
            by_pattern[&r.pattern()].push(v);
        }
    }
    for v in by_pattern.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    let mut warnings = Vec::new();
    let groups = by_pattern
        .iter()
        .map(|(p, v)| {
            if v.len() < 2 {
                warnings.push(format!(
                    "{}: {} observations, excluded from comparisons",
                    p.label(),
                    v.len()
                ));
            }
            let (mean, sd) = if v.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(v) };
            PatternGroup {
                pattern: *p,
                n: v.len(),
                mean,
                sd,
            }
        })
        .collect::<Vec<_>>();

    let mut comparisons = Vec::new();
    for (i, a) in ResponsePattern::ALL.iter().enumerate() {
        for b in &ResponsePattern::ALL[i + 1..] {
            let (va, vb) = (&by_pattern[a], &by_pattern[b]);
            if va.len() < 2 || vb.len() < 2 {
                continue;
            }
            let (t, df, p) = welch_t(va, vb);
            comparisons.push(GroupComparison {
                group_a: *a,
                group_b: *b,
                variable: variable.to_string(),
                mean_a: mean_sd(va).0,
                mean_b: mean_sd(vb).0,
                statistic: t,
                df,
                p,
                p_bonferroni: None,
            });
        }
    }
    if bonferroni {
        let m = comparisons.len() as f64;
        for c in &mut comparisons {
            c.p_bonferroni = Some((c.p * m).min(1.0));
        }
    }
    Ok(EndowmentReport {
        variable: variable.to_string(),
        groups,
        comparisons,
        warnings,
    })
}

/// Share of each response pattern. The last nonempty pattern takes the
/// complement of the others, so the shares add to exactly one.
pub fn response_pattern_shares(ds: &Dataset) -> Result<IndexMap<ResponsePattern, f64>> {
    if ds.is_empty() {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    let mut counts: IndexMap<ResponsePattern, usize> =
        ResponsePattern::ALL.iter().map(|p| (*p, 0)).collect();
    for r in ds.records() {
        counts[&r.pattern()] += 1;
    }
    let n = ds.len() as f64;
    let last = counts.values().rposition(|&c| c > 0).expect("nonempty dataset");
    let mut shares = IndexMap::new();
    let mut sum = 0.0;
    for (i, (p, c)) in counts.iter().enumerate() {
        let share = match i.cmp(&last) {
            std::cmp::Ordering::Less => *c as f64 / n,
            std::cmp::Ordering::Equal => 1.0 - sum,
            std::cmp::Ordering::Greater => 0.0,
        };
        sum += share;
        shares.insert(*p, share);
    }
    Ok(shares)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub n: usize,
    pub pattern_shares: IndexMap<ResponsePattern, f64>,
    pub anchoring: Vec<AnchoringReport>,
    pub endowment: Vec<EndowmentReport>,
    pub warnings: Vec<String>,
}

/// Every diagnostic the data supports: pattern shares always, anchoring
/// where open-ended maxima exist, endowment comparisons for `variables`.
pub fn diagnose(ds: &Dataset, variables: &[String], bonferroni: bool) -> Result<DiagnosticReport> {
    let mut warnings = Vec::new();
    let mut anchoring = Vec::new();
    for vehicle in AnchorVehicle::ALL {
        match anchoring_test(ds, vehicle) {
            Ok(r) => anchoring.push(r),
            Err(Error::InsufficientData(m)) => warnings.push(format!("anchoring ({vehicle:?}): {m}")),
            Err(e) => return Err(e),
        }
    }
    let endowment = variables
        .iter()
        .map(|v| endowment_comparison(ds, v, bonferroni))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticReport {
        n: ds.len(),
        pattern_shares: response_pattern_shares(ds)?,
        anchoring,
        endowment,
        warnings,
    })
}

/// Group means and intervals in long CSV form, for plotting elsewhere.
pub fn write_group_means_csv<W: Write>(report: &DiagnosticReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["test", "group", "n", "mean", "sd", "ci_low", "ci_high"])?;
    for a in &report.anchoring {
        let test = format!("{} by {}", a.variable, a.grouping);
        for g in &a.groups {
            w.write_record([
                test.clone(),
                g.bid.to_string(),
                g.n.to_string(),
                g.mean.to_string(),
                g.sd.to_string(),
                g.ci_low.to_string(),
                g.ci_high.to_string(),
            ])?;
        }
    }
    for e in &report.endowment {
        for g in &e.groups {
            w.write_record([
                e.variable.clone(),
                g.pattern.label().to_string(),
                g.n.to_string(),
                g.mean.to_string(),
                g.sd.to_string(),
                String::new(),
                String::new(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
