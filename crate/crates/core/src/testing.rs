//! Small fixtures shared by unit tests.

use indexmap::IndexMap;

use crate::biprobit::BiprobitSpec;
use crate::data::{Dataset, SurveyRecord, VarKind, VariableMeta};
use crate::model::ModelSpec;

pub(crate) fn record(id: usize, covariates: &[(&str, f64)], y1: bool, y2: bool) -> SurveyRecord {
    SurveyRecord {
        id: id.to_string(),
        bid_cash: 25.0,
        bid_labor: 1.0,
        y1,
        y2,
        max_wtp: None,
        max_wtc: None,
        covariates: covariates.iter().map(|(k, v)| (k.to_string(), Some(*v))).collect(),
        wage_slack: None,
        wage_peak: None,
        passthrough: IndexMap::new(),
    }
}

fn continuous(names: &[&str]) -> IndexMap<String, VariableMeta> {
    names
        .iter()
        .map(|n| {
            (
                n.to_string(),
                VariableMeta {
                    kind: VarKind::Continuous,
                    description: String::new(),
                },
            )
        })
        .collect()
}

/// One covariate `x` and outcome `y1`.
pub(crate) fn toy_dataset(rows: &[(f64, bool)]) -> Dataset {
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| record(i, &[("x", x)], y, false))
        .collect();
    Dataset::new(records, continuous(&["x"])).unwrap()
}

/// Covariates `x1`, `x2`; eq1 `y1 ~ x1`, eq2 `y2 ~ x2 + y1`.
pub(crate) fn biprobit_toy(rows: &[(f64, f64, bool, bool)]) -> (Dataset, BiprobitSpec) {
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(x1, x2, y1, y2))| record(i, &[("x1", x1), ("x2", x2)], y1, y2))
        .collect();
    let ds = Dataset::new(records, continuous(&["x1", "x2"])).unwrap();
    let spec = BiprobitSpec {
        eq1: ModelSpec::new("y1", &["x1"]),
        eq2: ModelSpec::new("y2", &["x2", "y1"]).with_endogenous("y1"),
    };
    (ds, spec)
}
