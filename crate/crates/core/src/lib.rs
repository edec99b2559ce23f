//! Dichotomous-choice contingent valuation with two payment vehicles.
//!
//! Single-equation and recursive bivariate probit estimation, marginal
//! effects, compensating-surplus welfare with shadow-wage conversion,
//! behavioral diagnostics and a Monte Carlo harness.

pub mod biprobit;
pub mod bvn;
pub mod data;
pub mod diagnostics;
pub mod effects;
pub mod error;
pub mod model;
pub mod optimize;
pub mod probit;
pub mod report;
pub mod simulate;
pub mod stats;
pub mod welfare;

#[cfg(test)]
mod testing;

pub use biprobit::{
    exogeneity_diagnostic, fit_biprobit, fit_recursive, lr_test_rho, BiprobitFit, BiprobitOptions,
    BiprobitSpec, ExogeneityReport, RecursiveFit,
};
pub use bvn::{bvn_cdf, quadrant_probs, Correlation, QuadrantProbs};
pub use data::{
    consistency_filter, load_csv, read_csv, write_csv, BidDesign, Dataset, ResponsePattern,
    SchemaConfig, SurveyRecord, VarKind,
};
pub use diagnostics::{
    anchoring_test, diagnose, endowment_comparison, response_pattern_shares, AnchorVehicle,
    AnchoringReport, DiagnosticReport, EndowmentReport,
};
pub use effects::{ame, ame_report, AmeRow, FitRef};
pub use error::{Error, Result};
pub use model::ModelSpec;
pub use probit::{fit_probit, Coef, FitResult, ProbitOptions};
pub use simulate::{generate, generate_rep, monte_carlo, DgpConfig, Generator, McResult};
pub use stats::TestResult;
pub use welfare::{
    cv_labor, cv_money, cv_total, labor_value, shadow_wage, welfare_report, welfare_table,
    ShadowWage, WageMode, WelfareFit, WelfareOptions, WelfareReport,
};
