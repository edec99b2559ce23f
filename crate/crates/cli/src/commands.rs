//! Command bodies. Each returns the exit outcome after writing its payload.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dualcv::data::{summarize, write_exclusions_jsonl, Exclusion, VariableSummary};
use dualcv::diagnostics::{diagnose as run_diagnostics, write_group_means_csv};
use dualcv::report::comparison_table;
use dualcv::simulate::ParamSummary;
use dualcv::{
    ame, ame_report, consistency_filter, exogeneity_diagnostic, fit_probit, fit_recursive,
    generate_rep, load_csv, lr_test_rho, monte_carlo, welfare_report, welfare_table, write_csv, AmeRow,
    BiprobitFit, BiprobitOptions, BiprobitSpec, Dataset, DgpConfig, DiagnosticReport, Error,
    ExogeneityReport, FitResult, McResult, ModelSpec, ProbitOptions, SchemaConfig, TestResult, WageMode,
    WelfareFit, WelfareOptions, WelfareReport,
};

use crate::{Failure, Format, Model, Outcome, Preset, Shared, WageModeArg};

type CliResult<T> = Result<T, Failure>;

/// Maps a library error onto the input field it most likely concerns.
fn core(e: Error) -> Failure {
    let field = match &e {
        Error::Parse { .. } | Error::Validation { .. } | Error::Csv(_) => "data",
        Error::NoVariation(_) | Error::RankDeficient(_) | Error::Separation(_) => "data",
        Error::InsufficientData(_) => "data",
        Error::Schema(_) => "schema",
        Error::Spec(_) | Error::UnknownVariable(_) | Error::SpecMismatch(_) => "spec",
        Error::Dimension { .. } => "spec",
        Error::Estimation(_) => "estimation",
        Error::BidSign { .. } | Error::Domain(_) => "welfare",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    };
    Failure::input(field, e)
}

fn read_json<T: for<'de> Deserialize<'de>>(field: &str, path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(field, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(field, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::input("json", e))?;
    s.push('\n');
    Ok(s)
}

/// Writes the payload to `--out` or stdout.
fn emit(shared: &Shared, payload: &str) -> CliResult<()> {
    match &shared.out {
        Some(path) => fs::write(path, payload).map_err(|e| Failure::input("out", format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(payload.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::input("out", e))
        }
    }
}

fn csv_string(rows: Vec<Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Failure::input("out", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::input("out", e))?;
    String::from_utf8(bytes).map_err(|e| Failure::input("out", e))
}

/// Caps the worker pool once per process.
fn init_threads(shared: &Shared) -> CliResult<()> {
    if let Some(n) = shared.threads {
        if n == 0 {
            return Err(Failure::input("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input("threads", e))?;
    }
    Ok(())
}

/// Loads `--data` through `--schema`, applying the consistency filter when
/// asked. `--exclusions` implies `--filter`.
fn load(shared: &Shared) -> CliResult<(Dataset, Vec<Exclusion>)> {
    let data = shared.data.as_ref().ok_or_else(|| Failure::required("data"))?;
    let schema_path = shared.schema.as_ref().ok_or_else(|| Failure::required("schema"))?;
    let schema = SchemaConfig::from_json_file(schema_path).map_err(|e| match e {
        Error::Io(io) => Failure::input("schema", format!("{}: {io}", schema_path.display())),
        other => Failure::input("schema", other),
    })?;
    let (ds, report) = load_csv(data, &schema).map_err(|e| match e {
        Error::Io(io) => Failure::input("data", format!("{}: {io}", data.display())),
        other => core(other),
    })?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if !(shared.filter || shared.exclusions.is_some()) {
        return Ok((ds, Vec::new()));
    }
    let (kept, excluded) = consistency_filter(&ds);
    log::info!("consistency filter dropped {} of {} respondents", excluded.len(), ds.len());
    if let Some(path) = &shared.exclusions {
        let file = fs::File::create(path).map_err(|e| Failure::input("exclusions", format!("{}: {e}", path.display())))?;
        write_exclusions_jsonl(&excluded, std::io::BufWriter::new(file)).map_err(|e| Failure::input("exclusions", e))?;
    }
    Ok((kept, excluded))
}

/// A spec file holds either both equations or one.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    Joint(BiprobitSpec),
    Single(ModelSpec),
}

fn read_spec(shared: &Shared) -> CliResult<SpecFile> {
    let path = shared.spec.as_ref().ok_or_else(|| Failure::required("spec"))?;
    read_json("spec", path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pair<T> {
    pub eq1: T,
    pub eq2: T,
}

/// The JSON written by `fit --model biprobit` and read back by `welfare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiprobitArtifact {
    pub model: String,
    pub joint: BiprobitFit,
    pub independent: Pair<FitResult>,
    pub lr_test: TestResult,
    pub exogeneity: ExogeneityReport,
    pub ame: Pair<Vec<AmeRow>>,
    pub excluded: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbitArtifact {
    pub model: String,
    pub fit: FitResult,
    pub ame: Vec<AmeRow>,
    pub excluded: usize,
    pub warnings: Vec<String>,
}

fn fit_joint(spec: &BiprobitSpec, ds: &Dataset, excluded: usize) -> CliResult<BiprobitArtifact> {
    let fit = fit_recursive(spec, ds, &BiprobitOptions::default()).map_err(core)?;
    let lr = lr_test_rho(&fit.joint, &fit.eq1, &fit.eq2).map_err(core)?;
    let exogeneity = exogeneity_diagnostic(&fit.eq2, &fit.joint).map_err(core)?;
    let ame1 = ame(&fit.joint, ds, 1).map_err(core)?;
    let ame2 = ame(&fit.joint, ds, 2).map_err(core)?;
    let mut warnings = fit.warnings.clone();
    if !fit.joint.converged {
        warnings.push(format!("joint model did not converge after {} iterations", fit.joint.iterations));
    }
    if fit.joint.boundary_warning {
        warnings.push("correlation estimate on the boundary; its standard error is withheld".into());
    }
    Ok(BiprobitArtifact {
        model: "biprobit".into(),
        joint: fit.joint,
        independent: Pair { eq1: fit.eq1, eq2: fit.eq2 },
        lr_test: lr,
        exogeneity,
        ame: Pair { eq1: ame1, eq2: ame2 },
        excluded,
        warnings,
    })
}

fn coef_rows(model: &str, equation: &str, names: &[String], coefs: &[f64], se: impl Fn(usize) -> f64) -> Vec<Vec<String>> {
    names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let s = se(j);
            vec![
                model.to_string(),
                equation.to_string(),
                n.clone(),
                coefs[j].to_string(),
                s.to_string(),
                (coefs[j] / s).to_string(),
            ]
        })
        .collect()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn biprobit_csv(a: &BiprobitArtifact) -> CliResult<String> {
    let mut rows = vec![header(&["model", "equation", "variable", "coef", "se", "z"])];
    for fit in [&a.independent.eq1, &a.independent.eq2] {
        rows.extend(coef_rows("univariate", &fit.spec.outcome, &fit.names, &fit.coefficients, |j| fit.se(j)));
    }
    for k in [1u8, 2] {
        let (names, coefs, vcov) = a.joint.equation(k).map_err(core)?;
        let outcome = if k == 1 { &a.joint.spec.eq1.outcome } else { &a.joint.spec.eq2.outcome };
        rows.extend(coef_rows("bivariate", outcome, &names, &coefs, |j| vcov[(j, j)].max(0.0).sqrt()));
    }
    let athrho = a.joint.athrho_coef();
    rows.push(vec![
        "bivariate".into(),
        "athrho".into(),
        "athrho".into(),
        athrho.est.to_string(),
        athrho.se.to_string(),
        (athrho.est / athrho.se).to_string(),
    ]);
    csv_string(rows)
}

fn biprobit_text(a: &BiprobitArtifact) -> String {
    let recursive = dualcv::RecursiveFit {
        joint: a.joint.clone(),
        eq1: a.independent.eq1.clone(),
        eq2: a.independent.eq2.clone(),
        warnings: a.warnings.clone(),
    };
    let mut out = comparison_table(&recursive, &a.lr_test);
    let e = &a.exogeneity;
    let _ = writeln!(
        out,
        "\nExogeneity of {}: univariate {:.2}, joint {:.2}, endogeneity indicated: {}",
        e.variable,
        e.univariate.est,
        e.joint.est,
        if e.endogeneity_indicated { "yes" } else { "no" }
    );
    for (k, rows) in [(1, &a.ame.eq1), (2, &a.ame.eq2)] {
        let outcome = if k == 1 { &a.joint.spec.eq1.outcome } else { &a.joint.spec.eq2.outcome };
        let _ = writeln!(out, "\nAverage marginal effects on Pr({outcome} = 1), joint model");
        out.push_str(&ame_report(rows));
    }
    if a.excluded > 0 {
        let _ = writeln!(out, "\n{} respondents dropped by the consistency filter", a.excluded);
    }
    for w in &a.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

fn probit_text(a: &ProbitArtifact) -> String {
    let f = &a.fit;
    let mut out = String::new();
    let _ = writeln!(out, "Probit of {}", f.spec.outcome);
    let _ = writeln!(out, "{:<20}  {:>8}  {:>8}  {:>8}", "", "Coef.", "SE", "z");
    for (j, n) in f.names.iter().enumerate() {
        let (b, s) = (f.coefficients[j], f.se(j));
        let _ = writeln!(out, "{n:<20}  {b:>8.2}  {s:>8.2}  {:>8.2}", b / s);
    }
    let _ = writeln!(out, "Log likelihood {:.2}; N = {}; converged: {}", f.loglik, f.n, f.converged);
    let _ = writeln!(out, "\nAverage marginal effects on Pr({} = 1)", f.spec.outcome);
    out.push_str(&ame_report(&a.ame));
    out
}

pub fn fit(shared: &Shared, model: Model, equation: u8) -> CliResult<Outcome> {
    init_threads(shared)?;
    let (ds, excluded) = load(shared)?;
    let spec = read_spec(shared)?;
    match model {
        Model::Biprobit => {
            let spec = match spec {
                SpecFile::Joint(s) => s,
                SpecFile::Single(_) => {
                    return Err(Failure::input("spec", "--model biprobit needs `eq1` and `eq2`"))
                }
            };
            let a = fit_joint(&spec, &ds, excluded.len())?;
            let payload = match shared.format {
                Format::Json => to_json(&a)?,
                Format::Text => biprobit_text(&a),
                Format::Csv => biprobit_csv(&a)?,
            };
            emit(shared, &payload)?;
            Ok(if a.joint.converged { Outcome::Done } else { Outcome::NotConverged })
        }
        Model::Probit => {
            let spec = match spec {
                SpecFile::Single(s) => s,
                SpecFile::Joint(s) => match equation {
                    1 => s.eq1,
                    2 => s.eq2,
                    k => return Err(Failure::input("equation", format!("must be 1 or 2, got {k}"))),
                },
            };
            let fit = fit_probit(&spec, &ds, &ProbitOptions::default()).map_err(core)?;
            let effects = ame(&fit, &ds, 1).map_err(core)?;
            let converged = fit.converged;
            let mut warnings = Vec::new();
            if !converged {
                warnings.push(format!("probit did not converge after {} iterations", fit.iterations));
            }
            let a = ProbitArtifact {
                model: "probit".into(),
                fit,
                ame: effects,
                excluded: excluded.len(),
                warnings,
            };
            let payload = match shared.format {
                Format::Json => to_json(&a)?,
                Format::Text => probit_text(&a),
                Format::Csv => {
                    let f = &a.fit;
                    let mut rows = vec![header(&["model", "equation", "variable", "coef", "se", "z"])];
                    rows.extend(coef_rows("univariate", &f.spec.outcome, &f.names, &f.coefficients, |j| f.se(j)));
                    csv_string(rows)?
                }
            };
            emit(shared, &payload)?;
            Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
        }
    }
}

pub struct WelfareArgs {
    pub fit: Option<PathBuf>,
    pub shadow_ratio: f64,
    pub wage_mode: WageModeArg,
    pub wages: Option<Vec<f64>>,
    pub draws: usize,
    pub truncate_negative: bool,
    pub separate: bool,
}

impl WelfareArgs {
    fn options(&self, seed: u64) -> WelfareOptions {
        WelfareOptions {
            shadow_ratio: self.shadow_ratio,
            wage_mode: match self.wage_mode {
                WageModeArg::Global => WageMode::Global,
                WageModeArg::Respondent => WageMode::Respondent,
            },
            truncate_negative: self.truncate_negative,
            sim_draws: self.draws,
            seed,
            global_wages: self.wages.as_ref().map(|w| (w[0], w[1])),
        }
    }
}

fn welfare_csv(r: &WelfareReport) -> CliResult<String> {
    let mut rows = vec![header(&[
        "id",
        "cv_money",
        "cv_labor",
        "cv_labor_annual_days",
        "mean_w",
        "labor_value",
        "labor_value_slack",
        "labor_value_peak",
        "cv_total",
    ])];
    for p in &r.per_respondent {
        rows.push(vec![
            p.id.clone(),
            p.cv_money.to_string(),
            p.cv_labor.to_string(),
            p.cv_labor_annual_days.to_string(),
            p.mean_w.to_string(),
            p.labor_value.to_string(),
            p.labor_value_slack.to_string(),
            p.labor_value_peak.to_string(),
            p.cv_total.to_string(),
        ]);
    }
    csv_string(rows)
}

fn welfare_text(r: &WelfareReport) -> String {
    let mut out = welfare_table(r);
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn welfare(shared: &Shared, args: &WelfareArgs) -> CliResult<Outcome> {
    init_threads(shared)?;
    let (ds, excluded) = load(shared)?;
    let artifact = match &args.fit {
        Some(path) => {
            let a: BiprobitArtifact = read_json("fit", path)?;
            if a.model != "biprobit" {
                return Err(Failure::input("fit", "artifact must come from `fit --model biprobit`"));
            }
            a
        }
        None => match shared.spec {
            Some(_) => match read_spec(shared)? {
                SpecFile::Joint(spec) => fit_joint(&spec, &ds, excluded.len())?,
                SpecFile::Single(_) => return Err(Failure::input("spec", "welfare needs `eq1` and `eq2`")),
            },
            None => return Err(Failure::required("fit")),
        },
    };
    let which = if args.separate {
        WelfareFit::Separate {
            cash: &artifact.independent.eq1,
            labor: &artifact.independent.eq2,
        }
    } else {
        WelfareFit::Joint(&artifact.joint)
    };
    let report = welfare_report(which, &ds, &args.options(shared.seed)).map_err(core)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let payload = match shared.format {
        Format::Json => to_json(&report)?,
        Format::Text => welfare_text(&report),
        Format::Csv => welfare_csv(&report)?,
    };
    emit(shared, &payload)?;
    let converged = if args.separate {
        artifact.independent.eq1.converged && artifact.independent.eq2.converged
    } else {
        artifact.joint.converged
    };
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}

fn p_text(t: &TestResult) -> String {
    match (t.statistic, t.p_value) {
        (Some(s), Some(p)) => format!("{s:.2} (p = {p:.4}, {})", t.verdict()),
        _ => format!("not computed ({})", t.note.as_deref().unwrap_or("degenerate")),
    }
}

fn diagnostics_text(r: &DiagnosticReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Response patterns (n = {})", r.n);
    for (pattern, share) in &r.pattern_shares {
        let _ = writeln!(out, "  {:<8}  {:>6.2}%", pattern.label(), 100.0 * share);
    }
    for a in &r.anchoring {
        let _ = writeln!(out, "\nAnchoring: {} by {}", a.variable, a.grouping);
        let _ = writeln!(out, "  {:>8}  {:>5}  {:>8}  {:>8}  {:>8}  {:>8}", "Bid", "n", "Mean", "SD", "CI low", "CI high");
        for g in &a.groups {
            let _ = writeln!(
                out,
                "  {:>8.2}  {:>5}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8.2}",
                g.bid, g.n, g.mean, g.sd, g.ci_low, g.ci_high
            );
        }
        let _ = writeln!(out, "  F = {}", p_text(&a.omnibus));
    }
    for e in &r.endowment {
        let _ = writeln!(out, "\nEndowment: {} by response pattern", e.variable);
        for g in &e.groups {
            let _ = writeln!(out, "  {:<8}  n = {:>4}  mean {:>8.2}  sd {:>8.2}", g.pattern.label(), g.n, g.mean, g.sd);
        }
        for c in &e.comparisons {
            let adj = c.p_bonferroni.map(|p| format!(", adjusted {p:.4}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "  {} vs {}: t = {:.2}, p = {:.4}{adj}",
                c.group_a.label(),
                c.group_b.label(),
                c.statistic,
                c.p
            );
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn diagnose(shared: &Shared, variables: &[String], bonferroni: bool) -> CliResult<Outcome> {
    init_threads(shared)?;
    let (ds, _) = load(shared)?;
    let report = run_diagnostics(&ds, variables, bonferroni).map_err(core)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let payload = match shared.format {
        Format::Json => to_json(&report)?,
        Format::Text => diagnostics_text(&report),
        Format::Csv => {
            let mut buf = Vec::new();
            write_group_means_csv(&report, &mut buf).map_err(core)?;
            String::from_utf8(buf).map_err(|e| Failure::input("out", e))?
        }
    };
    emit(shared, &payload)?;
    Ok(Outcome::Done)
}

pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub preset: Preset,
    pub n: Option<usize>,
    pub reps: usize,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub independent_only: bool,
    pub write_data: Option<PathBuf>,
}

/// Default sample size of the presets.
pub const PRESET_N: usize = 194;

/// Builds the data-generating process. `--seed` always replaces the seed in
/// a config file so that one flag governs every draw.
fn dgp(shared: &Shared, args: &SimulateArgs) -> CliResult<DgpConfig> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => read_json::<DgpConfig>("config", path)?,
        (None, Preset::SurveyLike) => DgpConfig::survey_like(PRESET_N, shared.seed),
        (None, Preset::Compact) => DgpConfig::compact(PRESET_N, 0.5, 0.7, shared.seed).map_err(core)?,
    };
    cfg.seed = shared.seed;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(rho) = args.rho {
        cfg = cfg.with_rho(rho).map_err(|e| Failure::input("rho", e))?;
    }
    if let Some(eta) = args.eta {
        cfg = cfg.with_eta(eta);
    }
    cfg.validate().map_err(|e| Failure::input("config", e))?;
    Ok(cfg)
}

fn summary_rows(set: &str, params: &[ParamSummary], rows: &mut Vec<Vec<String>>) {
    for p in params {
        rows.push(vec![
            set.to_string(),
            p.name.clone(),
            p.truth.to_string(),
            p.mean.to_string(),
            p.bias.to_string(),
            p.rmse.to_string(),
            p.coverage.to_string(),
        ]);
    }
}

fn rate(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into())
}

fn mc_text(mc: &McResult) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} replications of n = {}, seed {}; joint fits {}, independent fits {}, failure rate {:.3}",
        mc.replications, mc.n, mc.seed, mc.joint_successes, mc.independent_successes, mc.failure_rate
    );
    let width = mc
        .joint
        .iter()
        .chain(&mc.independent)
        .map(|p| p.name.len())
        .max()
        .unwrap_or(0)
        .max(9);
    for (title, params) in [("Joint model", &mc.joint), ("Independent probits", &mc.independent)] {
        if params.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n{title}");
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>8}",
            "Parameter", "Truth", "Mean", "Bias", "RMSE", "Coverage"
        );
        for p in params {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}  {:>8.3}",
                p.name, p.truth, p.mean, p.bias, p.rmse, p.coverage
            );
        }
    }
    let _ = writeln!(out, "\nLR test of rho = 0 rejection rate: {}", rate(mc.lr_rejection_rate));
    let _ = writeln!(out, "Independent eta sign flips: {}", rate(mc.eta_sign_flip_rate));
    let _ = writeln!(out, "Independent eta insignificant: {}", rate(mc.eta_insignificant_rate));
    let _ = writeln!(out, "Flip or insignificant: {}", rate(mc.eta_flip_or_insignificant_rate));
    out
}

pub fn simulate(shared: &Shared, args: &SimulateArgs) -> CliResult<Outcome> {
    init_threads(shared)?;
    let cfg = dgp(shared, args)?;
    let mc = monte_carlo(&cfg, args.reps, !args.independent_only).map_err(core)?;
    for f in &mc.failures {
        log::warn!("replication {} failed at {}: {}", f.rep, f.stage, f.message);
    }
    if let Some(dir) = &args.write_data {
        let fail = |e: std::io::Error| Failure::input("write-data", format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(fail)?;
        for rep in 0..args.reps as u64 {
            let ds = generate_rep(&cfg, rep).map_err(core)?;
            let schema = SchemaConfig::canonical(&ds);
            if rep == 0 {
                fs::write(dir.join("schema.json"), to_json(&schema)?).map_err(fail)?;
            }
            let file = fs::File::create(dir.join(format!("rep_{rep:04}.csv"))).map_err(fail)?;
            write_csv(&ds, &schema, std::io::BufWriter::new(file)).map_err(core)?;
        }
    }
    let payload = match shared.format {
        Format::Json => to_json(&mc)?,
        Format::Text => mc_text(&mc),
        Format::Csv => {
            let mut rows = vec![header(&["set", "parameter", "truth", "mean", "bias", "rmse", "coverage"])];
            summary_rows("joint", &mc.joint, &mut rows);
            summary_rows("independent", &mc.independent, &mut rows);
            csv_string(rows)?
        }
    };
    emit(shared, &payload)?;
    Ok(Outcome::Done)
}

/// Everything `report` produces, in reading order.
#[derive(Serialize)]
struct FullReport {
    descriptives: Vec<VariableSummary>,
    fit: BiprobitArtifact,
    welfare: Option<WelfareReport>,
    diagnostics: DiagnosticReport,
    warnings: Vec<String>,
}

fn descriptives_text(rows: &[VariableSummary]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>5}  {:>10}  {:>10}", "Variable", "N", "Mean", "SD");
    for r in rows {
        let _ = writeln!(out, "{:<width$}  {:>5}  {:>10.2}  {:>10.2}", r.name, r.n, r.mean, r.sd);
    }
    out
}

pub fn report(shared: &Shared, variables: &[String]) -> CliResult<Outcome> {
    init_threads(shared)?;
    if shared.format == Format::Csv {
        return Err(Failure::input("format", "report supports json and text"));
    }
    let (ds, excluded) = load(shared)?;
    let spec = match read_spec(shared)? {
        SpecFile::Joint(s) => s,
        SpecFile::Single(_) => return Err(Failure::input("spec", "report needs `eq1` and `eq2`")),
    };
    let descriptives = summarize(&ds).map_err(core)?;
    let fit = fit_joint(&spec, &ds, excluded.len())?;
    let mut warnings = Vec::new();
    let opts = WelfareOptions {
        seed: shared.seed,
        ..WelfareOptions::default()
    };
    let welfare = match welfare_report(&fit.joint, &ds, &opts) {
        Ok(w) => Some(w),
        Err(e) => {
            warnings.push(format!("welfare: {e}"));
            None
        }
    };
    let diagnostics = run_diagnostics(&ds, variables, true).map_err(core)?;
    let converged = fit.joint.converged;
    let full = FullReport {
        descriptives,
        fit,
        welfare,
        diagnostics,
        warnings,
    };
    for w in &full.warnings {
        log::warn!("{w}");
    }
    let payload = match shared.format {
        Format::Json => to_json(&full)?,
        Format::Text | Format::Csv => {
            let mut out = String::from("Descriptive statistics\n");
            out.push_str(&descriptives_text(&full.descriptives));
            out.push_str("\nEstimation\n");
            out.push_str(&biprobit_text(&full.fit));
            if let Some(w) = &full.welfare {
                out.push_str("\nWelfare\n");
                out.push_str(&welfare_text(w));
            }
            out.push_str("\nDiagnostics\n");
            out.push_str(&diagnostics_text(&full.diagnostics));
            for w in &full.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
            out
        }
    };
    emit(shared, &payload)?;
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}
