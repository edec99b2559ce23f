//! Survey records, CSV ingestion, the response-consistency filter and
//! descriptive statistics.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical variable names for the role columns.
pub mod vars {
    pub const Y1: &str = "y1";
    pub const Y2: &str = "y2";
    pub const BID_CASH: &str = "bid_cash";
    pub const BID_LABOR: &str = "bid_labor";
    pub const MAX_WTP: &str = "max_wtp";
    pub const MAX_WTC: &str = "max_wtc";
    pub const WAGE_SLACK: &str = "wage_slack";
    pub const WAGE_PEAK: &str = "wage_peak";
    pub const CONSTANT: &str = "constant";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Dummy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub kind: VarKind,
    #[serde(default)]
    pub description: String,
}

/// One respondent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub id: String,
    /// ETB per year per kada.
    pub bid_cash: f64,
    /// Days per month per kada.
    pub bid_labor: f64,
    pub y1: bool,
    pub y2: bool,
    pub max_wtp: Option<f64>,
    pub max_wtc: Option<f64>,
    pub covariates: IndexMap<String, Option<f64>>,
    pub wage_slack: Option<f64>,
    pub wage_peak: Option<f64>,
    /// Free-text columns carried through untouched (refusal reasons etc.).
    #[serde(default)]
    pub passthrough: IndexMap<String, String>,
}

impl SurveyRecord {
    /// Looks up a role variable or covariate by canonical name. `None` means
    /// missing or unknown.
    pub fn value(&self, name: &str) -> Option<f64> {
        match name {
            vars::CONSTANT => Some(1.0),
            vars::Y1 => Some(f64::from(u8::from(self.y1))),
            vars::Y2 => Some(f64::from(u8::from(self.y2))),
            vars::BID_CASH => Some(self.bid_cash),
            vars::BID_LABOR => Some(self.bid_labor),
            vars::MAX_WTP => self.max_wtp,
            vars::MAX_WTC => self.max_wtc,
            vars::WAGE_SLACK => self.wage_slack,
            vars::WAGE_PEAK => self.wage_peak,
            other => self.covariates.get(other).copied().flatten(),
        }
    }

    pub fn pattern(&self) -> ResponsePattern {
        ResponsePattern::from_responses(self.y1, self.y2)
    }
}

/// The four dichotomous response sequences (cash first, labor second).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResponsePattern {
    #[serde(rename = "Yes-Yes")]
    YesYes,
    #[serde(rename = "Yes-No")]
    YesNo,
    #[serde(rename = "No-Yes")]
    NoYes,
    #[serde(rename = "No-No")]
    NoNo,
}

impl ResponsePattern {
    pub const ALL: [ResponsePattern; 4] = [Self::YesYes, Self::YesNo, Self::NoYes, Self::NoNo];

    pub fn from_responses(y1: bool, y2: bool) -> Self {
        match (y1, y2) {
            (true, true) => Self::YesYes,
            (true, false) => Self::YesNo,
            (false, true) => Self::NoYes,
            (false, false) => Self::NoNo,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::YesYes => "Yes-Yes",
            Self::YesNo => "Yes-No",
            Self::NoYes => "No-Yes",
            Self::NoNo => "No-No",
        }
    }
}

/// Randomly assigned opening bids for each payment vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidDesign {
    pub cash_bids: Vec<f64>,
    pub labor_bids: Vec<f64>,
}

impl BidDesign {
    /// The cash (ETB/year) and labor (days/month) bid sets used in the Koga
    /// irrigation survey.
    pub fn koga() -> Self {
        Self {
            cash_bids: vec![25.0, 31.0, 37.0, 43.0, 49.0, 58.0, 70.0],
            labor_bids: vec![1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (label, bids) in [("cash_bids", &self.cash_bids), ("labor_bids", &self.labor_bids)] {
            if bids.is_empty() {
                return Err(Error::Config(format!("{label} must be nonempty")));
            }
            if bids.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                return Err(Error::Config(format!("{label} must be strictly positive")));
            }
            if bids.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!("{label} must be strictly increasing")));
            }
        }
        Ok(())
    }
}

/// Validated, immutable collection of survey records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<SurveyRecord>,
    variable_meta: IndexMap<String, VariableMeta>,
}

impl Dataset {
    /// Builds a dataset, checking that every record carries the same
    /// covariates and that dummies only take values in {0, 1}.
    pub fn new(
        records: Vec<SurveyRecord>,
        covariate_meta: IndexMap<String, VariableMeta>,
    ) -> Result<Self> {
        for (row, rec) in records.iter().enumerate() {
            let row = row + 1;
            if rec.covariates.len() != covariate_meta.len()
                || !covariate_meta.keys().all(|k| rec.covariates.contains_key(k))
            {
                return Err(Error::Validation {
                    row,
                    message: format!("record `{}` has a different covariate set", rec.id),
                });
            }
            for (name, meta) in &covariate_meta {
                if meta.kind == VarKind::Dummy {
                    if let Some(v) = rec.covariates[name] {
                        if v != 0.0 && v != 1.0 {
                            return Err(Error::Validation {
                                row,
                                message: format!("dummy `{name}` has value {v}"),
                            });
                        }
                    }
                }
            }
            for (name, v) in [(vars::MAX_WTP, rec.max_wtp), (vars::MAX_WTC, rec.max_wtc)] {
                if let Some(v) = v {
                    if v < 0.0 {
                        return Err(Error::Validation {
                            row,
                            message: format!("{name} must be nonnegative, got {v}"),
                        });
                    }
                }
            }
        }

        let mut variable_meta = IndexMap::new();
        let role = |kind, description: &str| VariableMeta {
            kind,
            description: description.to_string(),
        };
        variable_meta.insert(vars::Y1.into(), role(VarKind::Dummy, "accepted the cash bid"));
        variable_meta.insert(vars::Y2.into(), role(VarKind::Dummy, "accepted the labor bid"));
        variable_meta.insert(
            vars::BID_CASH.into(),
            role(VarKind::Continuous, "cash bid, ETB per year"),
        );
        variable_meta.insert(
            vars::BID_LABOR.into(),
            role(VarKind::Continuous, "labor bid, days per month"),
        );
        let optional = [
            (vars::MAX_WTP, "open-ended maximum WTP, ETB per year"),
            (vars::MAX_WTC, "open-ended maximum WTC, days per month"),
            (vars::WAGE_SLACK, "slack-season daily wage, ETB"),
            (vars::WAGE_PEAK, "peak-season daily wage, ETB"),
        ];
        for (name, description) in optional {
            if records.iter().any(|r| r.value(name).is_some()) {
                variable_meta.insert(name.into(), role(VarKind::Continuous, description));
            }
        }
        for (name, meta) in covariate_meta {
            if variable_meta.contains_key(&name) {
                return Err(Error::Schema(format!(
                    "covariate name `{name}` collides with a role variable"
                )));
            }
            variable_meta.insert(name, meta);
        }
        Ok(Self {
            records,
            variable_meta,
        })
    }

    pub fn records(&self) -> &[SurveyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn variable_meta(&self) -> &IndexMap<String, VariableMeta> {
        &self.variable_meta
    }

    pub fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.records
            .first()
            .into_iter()
            .flat_map(|r| r.covariates.keys().map(String::as_str))
    }

    pub fn covariate_meta(&self) -> IndexMap<String, VariableMeta> {
        let names: Vec<&str> = self.covariate_names().collect();
        self.variable_meta
            .iter()
            .filter(|(k, _)| names.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn kind_of(&self, name: &str) -> Option<VarKind> {
        self.variable_meta.get(name).map(|m| m.kind)
    }

    pub fn has_variable(&self, name: &str) -> bool {
        name == vars::CONSTANT || self.variable_meta.contains_key(name)
    }

    /// Same metadata, subset of records.
    pub fn select<F: FnMut(&SurveyRecord) -> bool>(&self, mut keep: F) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            variable_meta: self.variable_meta.clone(),
        }
    }

    /// Adds a derived covariate computed from each record.
    pub fn with_covariate<F>(&self, name: &str, meta: VariableMeta, f: F) -> Result<Dataset>
    where
        F: Fn(&SurveyRecord) -> Option<f64>,
    {
        let mut records = self.records.clone();
        for r in &mut records {
            let v = f(r);
            r.covariates.insert(name.to_string(), v);
        }
        let mut cov_meta = self.covariate_meta();
        cov_meta.insert(name.to_string(), meta);
        Dataset::new(records, cov_meta)
    }

    /// Active household labor as `working / (1 + dependents)`, with the
    /// formula recorded in the variable description.
    pub fn with_active_labor(&self, name: &str, working: &str, dependents: &str) -> Result<Dataset> {
        for v in [working, dependents] {
            if !self.has_variable(v) {
                return Err(Error::UnknownVariable(v.to_string()));
            }
        }
        let meta = VariableMeta {
            kind: VarKind::Continuous,
            description: format!("{working} / (1 + {dependents})"),
        };
        self.with_covariate(name, meta, |r| {
            Some(r.value(working)? / (1.0 + r.value(dependents)?))
        })
    }
}

/// Role a CSV column plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Id,
    Y1,
    Y2,
    BidCash,
    BidLabor,
    MaxWtp,
    MaxWtc,
    WageSlack,
    WagePeak,
    Covariate,
    Passthrough,
}

impl Role {
    fn canonical(self) -> Option<&'static str> {
        Some(match self {
            Role::Y1 => vars::Y1,
            Role::Y2 => vars::Y2,
            Role::BidCash => vars::BID_CASH,
            Role::BidLabor => vars::BID_LABOR,
            Role::MaxWtp => vars::MAX_WTP,
            Role::MaxWtc => vars::MAX_WTC,
            Role::WageSlack => vars::WAGE_SLACK,
            Role::WagePeak => vars::WAGE_PEAK,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<VarKind>,
    /// Multiplier applied to the raw cell value on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Variable name for covariates; defaults to the column header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ColumnSpec {
    pub fn role(role: Role) -> Self {
        Self {
            role,
            kind: None,
            scale: None,
            name: None,
            description: None,
        }
    }

    fn scale(&self) -> f64 {
        self.scale.unwrap_or(1.0)
    }
}

/// Maps CSV columns to roles. Serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub columns: IndexMap<String, ColumnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid_design: Option<BidDesign>,
}

impl SchemaConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Identity schema for datasets written by [`write_csv`] with canonical
    /// column names.
    pub fn canonical(ds: &Dataset) -> Self {
        let mut columns = IndexMap::new();
        columns.insert("id".to_string(), ColumnSpec::role(Role::Id));
        for role in [Role::Y1, Role::Y2, Role::BidCash, Role::BidLabor] {
            columns.insert(role.canonical().unwrap().to_string(), ColumnSpec::role(role));
        }
        for role in [Role::MaxWtp, Role::MaxWtc, Role::WageSlack, Role::WagePeak] {
            let name = role.canonical().unwrap();
            if ds.variable_meta.contains_key(name) {
                columns.insert(name.to_string(), ColumnSpec::role(role));
            }
        }
        for (name, meta) in ds.covariate_meta() {
            columns.insert(
                name,
                ColumnSpec {
                    role: Role::Covariate,
                    kind: Some(meta.kind),
                    scale: None,
                    name: None,
                    description: (!meta.description.is_empty()).then_some(meta.description),
                },
            );
        }
        if let Some(first) = ds.records.first() {
            for name in first.passthrough.keys() {
                columns.insert(name.clone(), ColumnSpec::role(Role::Passthrough));
            }
        }
        Self {
            columns,
            bid_design: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (col, spec) in &self.columns {
            if !matches!(spec.role, Role::Covariate | Role::Passthrough) {
                if let Some(prev) = seen.insert(spec.role.canonical().unwrap_or("id"), col) {
                    return Err(Error::Schema(format!(
                        "columns `{prev}` and `{col}` map to the same role"
                    )));
                }
            }
            if let Some(s) = spec.scale {
                if !(s.is_finite() && s != 0.0) {
                    return Err(Error::Schema(format!("column `{col}` has invalid scale {s}")));
                }
            }
        }
        for required in [Role::Y1, Role::Y2, Role::BidCash, Role::BidLabor] {
            if !self.columns.values().any(|c| c.role == required) {
                return Err(Error::Schema(format!(
                    "required role `{}` is not mapped to any column",
                    required.canonical().unwrap()
                )));
            }
        }
        if let Some(design) = &self.bid_design {
            design.validate()?;
        }
        Ok(())
    }
}

/// What ingestion observed besides the data itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    pub missing: IndexMap<String, usize>,
    pub warnings: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<(Dataset, LoadReport)> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "." | "NaN")
}

pub fn read_csv<R: Read>(reader: R, schema: &SchemaConfig) -> Result<(Dataset, LoadReport)> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |col: &str| headers.iter().position(|h| h == col);

    let mut cols = Vec::new();
    for (col, spec) in &schema.columns {
        let idx = index_of(col)
            .ok_or_else(|| Error::Schema(format!("column `{col}` not found in header")))?;
        cols.push((col.as_str(), spec, idx));
    }

    let mut report = LoadReport::default();
    for (col, _, _) in &cols {
        report.missing.insert(col.to_string(), 0);
    }
    for h in headers.iter() {
        if !schema.columns.contains_key(h) {
            report.warnings.push(format!("column `{h}` is not mapped and was ignored"));
        }
    }

    let mut cov_meta = IndexMap::new();
    for (col, spec, _) in &cols {
        if spec.role == Role::Covariate {
            let name = spec.name.clone().unwrap_or_else(|| col.to_string());
            cov_meta.insert(
                name,
                VariableMeta {
                    kind: spec.kind.unwrap_or(VarKind::Continuous),
                    description: spec.description.clone().unwrap_or_default(),
                },
            );
        }
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let mut rec = SurveyRecord {
            id: row_no.to_string(),
            bid_cash: f64::NAN,
            bid_labor: f64::NAN,
            y1: false,
            y2: false,
            max_wtp: None,
            max_wtc: None,
            covariates: IndexMap::new(),
            wage_slack: None,
            wage_peak: None,
            passthrough: IndexMap::new(),
        };
        for (col, spec, idx) in &cols {
            let cell = row.get(*idx).unwrap_or("");
            match spec.role {
                Role::Id => {
                    if !cell.is_empty() {
                        rec.id = cell.to_string();
                    }
                    continue;
                }
                Role::Passthrough => {
                    rec.passthrough.insert(col.to_string(), cell.to_string());
                    continue;
                }
                _ => {}
            }
            let value = if is_missing(cell) {
                *report.missing.get_mut(*col).unwrap() += 1;
                None
            } else {
                let raw: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: row_no,
                    column: col.to_string(),
                    message: format!("`{cell}` is not a number"),
                })?;
                if !raw.is_finite() {
                    return Err(Error::Parse {
                        row: row_no,
                        column: col.to_string(),
                        message: format!("`{cell}` is not finite"),
                    });
                }
                Some(raw)
            };
            let required = |v: Option<f64>| {
                v.ok_or_else(|| Error::Validation {
                    row: row_no,
                    message: format!("required column `{col}` is empty"),
                })
            };
            let binary = |v: Option<f64>| -> Result<bool> {
                match required(v)? {
                    x if x == 0.0 => Ok(false),
                    x if x == 1.0 => Ok(true),
                    x => Err(Error::Validation {
                        row: row_no,
                        message: format!("`{col}` must be 0 or 1, got {x}"),
                    }),
                }
            };
            let scaled = value.map(|v| v * spec.scale());
            match spec.role {
                Role::Y1 => rec.y1 = binary(value)?,
                Role::Y2 => rec.y2 = binary(value)?,
                Role::BidCash => rec.bid_cash = required(scaled)?,
                Role::BidLabor => rec.bid_labor = required(scaled)?,
                Role::MaxWtp => rec.max_wtp = scaled,
                Role::MaxWtc => rec.max_wtc = scaled,
                Role::WageSlack => rec.wage_slack = scaled,
                Role::WagePeak => rec.wage_peak = scaled,
                Role::Covariate => {
                    let name = spec.name.clone().unwrap_or_else(|| col.to_string());
                    if cov_meta[&name].kind == VarKind::Dummy {
                        if let Some(v) = value {
                            if v != 0.0 && v != 1.0 {
                                return Err(Error::Validation {
                                    row: row_no,
                                    message: format!("dummy `{col}` must be 0 or 1, got {v}"),
                                });
                            }
                        }
                    }
                    rec.covariates.insert(name, scaled);
                }
                Role::Id | Role::Passthrough => unreachable!(),
            }
        }
        if let Some(design) = &schema.bid_design {
            if !design.cash_bids.contains(&rec.bid_cash) {
                report.warnings.push(format!(
                    "row {row_no}: cash bid {} is not in the bid design",
                    rec.bid_cash
                ));
            }
            if !design.labor_bids.contains(&rec.bid_labor) {
                report.warnings.push(format!(
                    "row {row_no}: labor bid {} is not in the bid design",
                    rec.bid_labor
                ));
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    report.rows = records.len();
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok((Dataset::new(records, cov_meta)?, report))
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the dataset using the column names and scales of `schema`
/// (values are divided by the scale so a reload reproduces them).
pub fn write_csv<W: Write>(ds: &Dataset, schema: &SchemaConfig, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(schema.columns.keys())?;
    for rec in &ds.records {
        let mut row = Vec::with_capacity(schema.columns.len());
        for (col, spec) in &schema.columns {
            let cell = match spec.role {
                Role::Id => rec.id.clone(),
                Role::Passthrough => rec.passthrough.get(col).cloned().unwrap_or_default(),
                Role::Covariate => {
                    let name = spec.name.as_deref().unwrap_or(col);
                    fmt_cell(rec.value(name).map(|v| v / spec.scale()))
                }
                Role::Y1 | Role::Y2 => fmt_cell(rec.value(spec.role.canonical().unwrap())),
                role => fmt_cell(rec.value(role.canonical().unwrap()).map(|v| v / spec.scale())),
            };
            row.push(cell);
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// A record removed by [`consistency_filter`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub rule: String,
    pub values: IndexMap<String, f64>,
}

pub const RULE_WTP: &str = "open-ended WTP below accepted cash bid";
pub const RULE_WTC: &str = "open-ended WTC below accepted labor bid";

/// Drops respondents who accepted a bid in the dichotomous question but then
/// stated a lower open-ended maximum. Records with a missing follow-up are
/// kept.
pub fn consistency_filter(ds: &Dataset) -> (Dataset, Vec<Exclusion>) {
    let mut exclusions = Vec::new();
    let mut kept = Vec::with_capacity(ds.records.len());
    for rec in &ds.records {
        let mut rules = Vec::new();
        let mut values = IndexMap::new();
        if let Some(m) = rec.max_wtp {
            if rec.y1 && m < rec.bid_cash {
                rules.push(RULE_WTP);
                values.insert(vars::BID_CASH.to_string(), rec.bid_cash);
                values.insert(vars::MAX_WTP.to_string(), m);
            }
        }
        if let Some(m) = rec.max_wtc {
            if rec.y2 && m < rec.bid_labor {
                rules.push(RULE_WTC);
                values.insert(vars::BID_LABOR.to_string(), rec.bid_labor);
                values.insert(vars::MAX_WTC.to_string(), m);
            }
        }
        if rules.is_empty() {
            kept.push(rec.clone());
        } else {
            exclusions.push(Exclusion {
                id: rec.id.clone(),
                rule: rules.join("; "),
                values,
            });
        }
    }
    let filtered = Dataset {
        records: kept,
        variable_meta: ds.variable_meta.clone(),
    };
    (filtered, exclusions)
}

/// One JSON object per line.
pub fn write_exclusions_jsonl<W: Write>(exclusions: &[Exclusion], mut w: W) -> Result<()> {
    for e in exclusions {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub kind: VarKind,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    /// Share of ones, dummies only.
    pub share: Option<f64>,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if let Some(&first) = values.first() {
        if values.iter().all(|&v| v == first) {
            return (first, 0.0);
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Mean, standard deviation and (for dummies) share of every variable, in
/// metadata order. Missing cells are skipped per variable.
pub fn summarize(ds: &Dataset) -> Result<Vec<VariableSummary>> {
    if ds.is_empty() {
        return Err(Error::InsufficientData("cannot summarize an empty dataset".into()));
    }
    let mut out = Vec::new();
    for (name, meta) in &ds.variable_meta {
        let values: Vec<f64> = ds.records.iter().filter_map(|r| r.value(name)).collect();
        if values.is_empty() {
            continue;
        }
        let (mean, sd) = mean_sd(&values);
        out.push(VariableSummary {
            name: name.clone(),
            kind: meta.kind,
            n: values.len(),
            mean,
            sd,
            share: (meta.kind == VarKind::Dummy).then_some(mean),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SchemaConfig {
        serde_json::from_str(
            r#"{
              "columns": {
                "hh": {"role": "id"},
                "wtp_yes": {"role": "y1"},
                "wtc_yes": {"role": "y2"},
                "bid": {"role": "bid_cash"},
                "days": {"role": "bid_labor"},
                "maxwtp": {"role": "max_wtp"},
                "maxwtc": {"role": "max_wtc"},
                "young": {"role": "covariate", "kind": "dummy"},
                "income": {"role": "covariate", "scale": 0.001, "name": "pc_income"},
                "why": {"role": "passthrough"}
              },
              "bid_design": {"cash_bids": [25, 31, 37, 43, 49, 58, 70], "labor_bids": [1, 1.5, 2, 2.5, 3]}
            }"#,
        )
        .unwrap()
    }

    const CSV: &str = "hh,wtp_yes,wtc_yes,bid,days,maxwtp,maxwtc,young,income,why\n\
        a,1,0,49,2,60,,1,1500,\n\
        b,0,1,25,1.5,,3,0,800,cannot afford\n\
        c,1,1,70,3,40,3,,NA,\n";

    #[test]
    fn loads_with_roles_and_scale() {
        let (ds, report) = read_csv(CSV.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(report.rows, 3);
        assert_eq!(report.missing["maxwtp"], 1);
        assert_eq!(report.missing["income"], 1);
        let a = &ds.records()[0];
        assert_eq!(a.id, "a");
        assert!(a.y1 && !a.y2);
        assert_eq!(a.value("pc_income"), Some(1.5));
        assert_eq!(ds.records()[1].passthrough["why"], "cannot afford");
        assert_eq!(ds.kind_of("young"), Some(VarKind::Dummy));
        assert_eq!(ds.kind_of("y1"), Some(VarKind::Dummy));
        assert!(report.warnings.iter().all(|w| !w.contains("bid design")));
    }

    #[test]
    fn empty_file_is_schema_error() {
        let err = read_csv(
            "hh,wtp_yes,wtc_yes,bid,days,maxwtp,maxwtc,young,income,why\n".as_bytes(),
            &schema(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m == "no data rows"), "{err}");
    }

    #[test]
    fn non_binary_outcome_names_row() {
        let bad = CSV.replace("b,0,1,25", "b,2,1,25");
        let err = read_csv(bad.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Validation { row: 2, .. }), "{err}");
    }

    #[test]
    fn non_numeric_cell_is_parse_error() {
        let bad = CSV.replace("a,1,0,49", "a,1,0,forty");
        let err = read_csv(bad.as_bytes(), &schema()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "bid");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unmapped_required_role() {
        let mut s = schema();
        s.columns.shift_remove("days");
        let err = read_csv(CSV.as_bytes(), &s).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("bid_labor")));
    }

    #[test]
    fn off_design_bid_warns() {
        let odd = CSV.replace("a,1,0,49", "a,1,0,50");
        let (_, report) = read_csv(odd.as_bytes(), &schema()).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("cash bid 50")));
    }

    #[test]
    fn bad_dummy_rejected() {
        let bad = CSV.replace("60,,1,1500", "60,,3,1500");
        assert!(matches!(
            read_csv(bad.as_bytes(), &schema()),
            Err(Error::Validation { row: 1, .. })
        ));
    }

    #[test]
    fn filter_rules() {
        let (ds, _) = read_csv(CSV.as_bytes(), &schema()).unwrap();
        let (kept, excl) = consistency_filter(&ds);
        // c accepted 70 but states 40
        assert_eq!(excl.len(), 1);
        assert_eq!(excl[0].id, "c");
        assert_eq!(excl[0].rule, RULE_WTP);
        assert_eq!(excl[0].values["max_wtp"], 40.0);
        assert_eq!(kept.len(), 2);

        let mut buf = Vec::new();
        write_exclusions_jsonl(&excl, &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(line.lines().count(), 1);
        assert!(line.contains("\"rule\":\"open-ended WTP below accepted cash bid\""));
    }

    #[test]
    fn filter_boundary_and_missing() {
        let text = "hh,wtp_yes,wtc_yes,bid,days,maxwtp,maxwtc,young,income,why\n\
            e,0,1,49,2,,2,1,1,\n\
            f,1,0,49,2,40,,1,1,\n\
            g,1,1,49,2,,,1,1,\n";
        let (ds, _) = read_csv(text.as_bytes(), &schema()).unwrap();
        let (kept, excl) = consistency_filter(&ds);
        assert_eq!(excl.len(), 1);
        assert_eq!(excl[0].id, "f");
        let ids: Vec<_> = kept.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["e", "g"]);
    }

    #[test]
    fn summary_arithmetic() {
        let text = "hh,wtp_yes,wtc_yes,bid,days,maxwtp,maxwtc,young,income,why\n\
            a,1,0,25,2,,,1,1000,\n\
            b,0,1,25,2,,,0,3000,\n";
        let (ds, _) = read_csv(text.as_bytes(), &schema()).unwrap();
        let s = summarize(&ds).unwrap();
        let get = |n: &str| s.iter().find(|v| v.name == n).unwrap();
        assert_eq!(get("pc_income").mean, 2.0);
        assert!((get("pc_income").sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(get("bid_cash").sd, 0.0);
        assert_eq!(get("young").share, Some(0.5));
        assert!(s.iter().all(|v| v.name != "max_wtp"));
    }

    #[test]
    fn active_labor_formula() {
        let (ds, _) = read_csv(CSV.as_bytes(), &schema()).unwrap();
        let ds = ds.with_active_labor("active", "pc_income", "young").unwrap();
        assert_eq!(ds.records()[0].value("active"), Some(1.5 / 2.0));
        assert_eq!(ds.records()[2].value("active"), None);
        assert_eq!(ds.variable_meta()["active"].description, "pc_income / (1 + young)");
    }

    #[test]
    fn bid_design_validation() {
        assert!(BidDesign::koga().validate().is_ok());
        let bad = BidDesign {
            cash_bids: vec![10.0, 5.0],
            labor_bids: vec![1.0],
        };
        assert!(bad.validate().is_err());
    }
}
