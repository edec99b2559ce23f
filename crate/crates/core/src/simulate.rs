//! Synthetic surveys from the recursive bivariate probit and a Monte Carlo
//! harness for parameter recovery, test size and the bias of fitting the
//! two equations separately.
//!
//! Every record draws from its own ChaCha8 stream keyed by
//! (seed, replication, record), so output never depends on thread count or
//! scheduling.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biprobit::{fit_recursive, BiprobitOptions, BiprobitSpec};
use crate::bvn::Correlation;
use crate::data::{vars, BidDesign, Dataset, SurveyRecord, VarKind, VariableMeta};
use crate::effects::Z_95;
use crate::error::{Error, Result};
use crate::model::{complete_rows, Design, ModelSpec};
use crate::probit::{fit_design, FitResult};

/// Distribution of one simulated covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    Normal { mu: f64, sd: f64 },
    Bernoulli { p: f64 },
    Uniform { a: f64, b: f64 },
}

/// A validated generator ready to sample.
enum Sampler {
    Normal(Normal<f64>),
    Bernoulli(Bernoulli),
    Uniform(Uniform<f64>),
}

impl Generator {
    fn sampler(&self) -> Result<Sampler> {
        let bad = |m: String| Error::Config(m);
        Ok(match *self {
            Generator::Normal { mu, sd } => Sampler::Normal(
                Normal::new(mu, sd).map_err(|e| bad(format!("normal({mu}, {sd}): {e}")))?,
            ),
            Generator::Bernoulli { p } => Sampler::Bernoulli(
                Bernoulli::new(p).map_err(|e| bad(format!("bernoulli({p}): {e}")))?,
            ),
            Generator::Uniform { a, b } => Sampler::Uniform(
                Uniform::new(a, b).map_err(|e| bad(format!("uniform({a}, {b}): {e}")))?,
            ),
        })
    }

    fn kind(&self) -> VarKind {
        match self {
            Generator::Bernoulli { .. } => VarKind::Dummy,
            _ => VarKind::Continuous,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Generator::Normal { mu, sd } => format!("simulated normal({mu}, {sd})"),
            Generator::Bernoulli { p } => format!("simulated bernoulli({p})"),
            Generator::Uniform { a, b } => format!("simulated uniform({a}, {b})"),
        }
    }
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Bernoulli(d) => f64::from(u8::from(d.sample(rng))),
            Sampler::Uniform(d) => d.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WageGenerators {
    pub slack: Generator,
    pub peak: Generator,
}

/// Data-generating process. Coefficient maps name the constant, the bids,
/// covariates and (in the second equation) `y1`, whose coefficient is η.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub eq1_coefs: IndexMap<String, f64>,
    pub eq2_coefs: IndexMap<String, f64>,
    pub rho: Correlation,
    pub bid_design: BidDesign,
    pub covariate_generators: IndexMap<String, Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wage_generators: Option<WageGenerators>,
    pub seed: u64,
}

fn coefs(pairs: &[(&str, f64)]) -> IndexMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl DgpConfig {
    /// Coefficients from the bivariate fit of the irrigation survey,
    /// covariates matched to its sample moments (income in thousands of
    /// ETB), the survey's bid sets and ρ = 0.9.
    pub fn survey_like(n: usize, seed: u64) -> Self {
        let gens = [
            ("dependency_ratio", Generator::Normal { mu: 0.86, sd: 0.63 }),
            ("per_capita_income", Generator::Uniform { a: 0.0, b: 2.246 }),
            ("experience", Generator::Bernoulli { p: 0.18 }),
            ("young", Generator::Bernoulli { p: 0.55 }),
            ("education", Generator::Normal { mu: 5.65, sd: 4.15 }),
            ("land", Generator::Normal { mu: 1.04, sd: 0.54 }),
            ("cart", Generator::Bernoulli { p: 0.31 }),
        ];
        Self {
            n,
            eq1_coefs: coefs(&[
                (vars::CONSTANT, 1.43),
                (vars::BID_CASH, -0.04),
                ("dependency_ratio", -0.89),
                ("per_capita_income", 0.55),
                ("experience", 1.17),
                ("young", 0.84),
                ("education", 0.07),
            ]),
            eq2_coefs: coefs(&[
                (vars::CONSTANT, 2.19),
                (vars::BID_LABOR, -0.73),
                ("land", -0.18),
                ("experience", 0.71),
                ("dependency_ratio", -1.06),
                ("cart", 0.32),
                ("young", 1.49),
                ("education", 0.07),
                (vars::Y1, -1.21),
            ]),
            rho: Correlation::new(0.9).expect("valid correlation"),
            bid_design: BidDesign::koga(),
            covariate_generators: gens.iter().map(|(k, g)| (k.to_string(), *g)).collect(),
            wage_generators: Some(WageGenerators {
                slack: Generator::Uniform { a: 9.17, b: 17.93 },
                peak: Generator::Uniform { a: 13.17, b: 22.25 },
            }),
            seed,
        }
    }

    /// Intercepts, bids, one normal covariate per equation and η; every
    /// coefficient other than η and the bids is zero-centered.
    pub fn compact(n: usize, rho: f64, eta: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            n,
            eq1_coefs: coefs(&[(vars::CONSTANT, 1.8), (vars::BID_CASH, -0.04), ("x1", 0.5)]),
            eq2_coefs: coefs(&[
                (vars::CONSTANT, 1.5),
                (vars::BID_LABOR, -0.73),
                ("x2", 0.5),
                (vars::Y1, eta),
            ]),
            rho: Correlation::new(rho)?,
            bid_design: BidDesign::koga(),
            covariate_generators: [
                ("x1".to_string(), Generator::Normal { mu: 0.0, sd: 1.0 }),
                ("x2".to_string(), Generator::Normal { mu: 0.0, sd: 1.0 }),
            ]
            .into_iter()
            .collect(),
            wage_generators: None,
            seed,
        })
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.rho = Correlation::new(rho)?;
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eq2_coefs.insert(vars::Y1.to_string(), eta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        self.bid_design.validate()?;
        for g in self.covariate_generators.values() {
            g.sampler()?;
        }
        if let Some(w) = &self.wage_generators {
            w.slack.sampler()?;
            w.peak.sampler()?;
        }
        for (eq, map) in [(1, &self.eq1_coefs), (2, &self.eq2_coefs)] {
            for (name, v) in map {
                if !v.is_finite() {
                    return Err(Error::Config(format!("equation {eq}: `{name}` is not finite")));
                }
                let known = matches!(name.as_str(), vars::CONSTANT | vars::BID_CASH | vars::BID_LABOR)
                    || (eq == 2 && name == vars::Y1)
                    || self.covariate_generators.contains_key(name);
                if !known {
                    return Err(Error::Config(format!(
                        "equation {eq}: no generator for `{name}`"
                    )));
                }
            }
        }
        for name in self.covariate_generators.keys() {
            if matches!(
                name.as_str(),
                vars::CONSTANT | vars::Y1 | vars::Y2 | vars::BID_CASH | vars::BID_LABOR
            ) {
                return Err(Error::Config(format!("`{name}` cannot be a generated covariate")));
            }
        }
        Ok(())
    }

    /// The estimating specification: every coefficient the DGP names.
    pub fn spec(&self) -> BiprobitSpec {
        let regressors = |m: &IndexMap<String, f64>| -> Vec<String> {
            m.keys().filter(|k| *k != vars::CONSTANT).cloned().collect()
        };
        let eq1 = ModelSpec {
            outcome: vars::Y1.into(),
            regressors: regressors(&self.eq1_coefs),
            endogenous_regressor: None,
        };
        let eq2_regs = regressors(&self.eq2_coefs);
        let endogenous = eq2_regs.iter().any(|r| r == vars::Y1).then(|| vars::Y1.to_string());
        BiprobitSpec {
            eq1,
            eq2: ModelSpec {
                outcome: vars::Y2.into(),
                regressors: eq2_regs,
                endogenous_regressor: endogenous,
            },
        }
    }

    /// True values in estimation order: eq1 coefficients, eq2 coefficients,
    /// then athrho.
    pub fn truth(&self) -> (Vec<String>, Vec<f64>) {
        let spec = self.spec();
        let mut names = Vec::new();
        let mut values = Vec::new();
        for (prefix, eq, map) in [("eq1", &spec.eq1, &self.eq1_coefs), ("eq2", &spec.eq2, &self.eq2_coefs)] {
            for n in eq.coef_names() {
                values.push(map.get(&n).copied().unwrap_or(0.0));
                names.push(format!("{prefix}:{n}"));
            }
        }
        names.push("athrho".into());
        values.push(self.rho.value().atanh());
        (names, values)
    }
}

/// Generator for record `index` of replication `rep`.
fn record_rng(seed: u64, rep: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&rep.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Index of an equation excluding its bid and (for eq2) `y1` terms.
fn partial_index(map: &IndexMap<String, f64>, x: &IndexMap<String, Option<f64>>, skip: &[&str]) -> f64 {
    map.iter()
        .filter(|(k, _)| !skip.contains(&k.as_str()))
        .map(|(k, c)| {
            let v = if k == vars::CONSTANT { 1.0 } else { x[k.as_str()].expect("generated") };
            c * v
        })
        .sum()
}

/// Latent open-ended maximum `max(0, −(v_nobid + ε)/β_bid)`, absent when
/// the bid coefficient is not negative.
fn latent_max(v_nobid: f64, eps: f64, bid_coef: f64) -> Option<f64> {
    (bid_coef < 0.0).then(|| (-(v_nobid + eps) / bid_coef).max(0.0))
}

/// One synthetic survey; replication `rep` of `cfg`.
pub fn generate_rep(cfg: &DgpConfig, rep: u64) -> Result<Dataset> {
    cfg.validate()?;
    let samplers: Vec<(String, Sampler)> = cfg
        .covariate_generators
        .iter()
        .map(|(k, g)| Ok((k.clone(), g.sampler()?)))
        .collect::<Result<_>>()?;
    let wages = cfg
        .wage_generators
        .as_ref()
        .map(|w| Ok::<_, Error>((w.slack.sampler()?, w.peak.sampler()?)))
        .transpose()?;
    let rho = cfg.rho.value();
    let root = (1.0 - rho * rho).sqrt();
    let beta_bid = cfg.eq1_coefs.get(vars::BID_CASH).copied().unwrap_or(0.0);
    let theta_bid = cfg.eq2_coefs.get(vars::BID_LABOR).copied().unwrap_or(0.0);
    let eta = cfg.eq2_coefs.get(vars::Y1).copied().unwrap_or(0.0);
    let cash = &cfg.bid_design.cash_bids;
    let labor = &cfg.bid_design.labor_bids;

    let records = (0..cfg.n)
        .map(|i| {
            let mut rng = record_rng(cfg.seed, rep, i as u64);
            let covariates: IndexMap<String, Option<f64>> = samplers
                .iter()
                .map(|(k, s)| (k.clone(), Some(s.draw(&mut rng))))
                .collect();
            let bid_cash = cash[rng.random_range(0..cash.len())];
            let bid_labor = labor[rng.random_range(0..labor.len())];
            let e1: f64 = rng.sample(StandardNormal);
            let xi: f64 = rng.sample(StandardNormal);
            let e2 = rho * e1 + root * xi;
            let (wage_slack, wage_peak) = match &wages {
                Some((s, p)) => (Some(s.draw(&mut rng)), Some(p.draw(&mut rng))),
                None => (None, None),
            };

            let v1_nobid = partial_index(&cfg.eq1_coefs, &covariates, &[vars::BID_CASH]);
            let v2_base = partial_index(&cfg.eq2_coefs, &covariates, &[vars::BID_LABOR, vars::Y1]);
            let y1 = v1_nobid + beta_bid * bid_cash + e1 > 0.0;
            let v2_nobid = v2_base + if y1 { eta } else { 0.0 };
            let y2 = v2_nobid + theta_bid * bid_labor + e2 > 0.0;
            SurveyRecord {
                id: (i + 1).to_string(),
                bid_cash,
                bid_labor,
                y1,
                y2,
                max_wtp: latent_max(v1_nobid, e1, beta_bid),
                max_wtc: latent_max(v2_nobid, e2, theta_bid),
                covariates,
                wage_slack,
                wage_peak,
                passthrough: IndexMap::new(),
            }
        })
        .collect();
    let meta = cfg
        .covariate_generators
        .iter()
        .map(|(k, g)| {
            (
                k.clone(),
                VariableMeta {
                    kind: g.kind(),
                    description: g.describe(),
                },
            )
        })
        .collect();
    Dataset::new(records, meta)
}

/// The synthetic survey for `cfg.seed`.
pub fn generate(cfg: &DgpConfig) -> Result<Dataset> {
    generate_rep(cfg, 0)
}

/// Recovery statistics of one parameter across successful replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Share of 95% Wald intervals covering the truth.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub rep: u64,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub replications: usize,
    pub n: usize,
    pub seed: u64,
    pub fit_both: bool,
    pub joint_successes: usize,
    pub independent_successes: usize,
    pub failure_rate: f64,
    pub joint: Vec<ParamSummary>,
    pub independent: Vec<ParamSummary>,
    /// Rejection rate of the LR test of ρ = 0 at 5%.
    pub lr_rejection_rate: Option<f64>,
    /// Share of separate fits whose η has the opposite sign to the truth.
    pub eta_sign_flip_rate: Option<f64>,
    /// Share of separate fits with |t(η)| < 1.96.
    pub eta_insignificant_rate: Option<f64>,
    pub eta_flip_or_insignificant_rate: Option<f64>,
    pub failures: Vec<RepFailure>,
}

/// Estimates and standard errors of one replication.
#[derive(Debug, Clone, Default)]
struct RepOutcome {
    joint: Option<(Vec<f64>, Vec<f64>)>,
    independent: Option<(Vec<f64>, Vec<f64>)>,
    lr_reject: Option<bool>,
    failures: Vec<RepFailure>,
}

fn stacked(eq1: &FitResult, eq2: &FitResult) -> (Vec<f64>, Vec<f64>) {
    let est = eq1.coefficients.iter().chain(&eq2.coefficients).copied().collect();
    let se = (0..eq1.names.len())
        .map(|j| eq1.se(j))
        .chain((0..eq2.names.len()).map(|j| eq2.se(j)))
        .collect();
    (est, se)
}

fn run_rep(cfg: &DgpConfig, rep: u64, fit_both: bool, opts: &BiprobitOptions) -> RepOutcome {
    let mut out = RepOutcome::default();
    let fail = |stage: &str, e: &dyn std::fmt::Display| RepFailure {
        rep,
        stage: stage.to_string(),
        message: e.to_string(),
    };
    let ds = match generate_rep(cfg, rep) {
        Ok(ds) => ds,
        Err(e) => {
            out.failures.push(fail("generate", &e));
            return out;
        }
    };
    let spec = cfg.spec();
    if fit_both {
        match fit_recursive(&spec, &ds, opts) {
            Ok(fit) => {
                out.independent = Some(stacked(&fit.eq1, &fit.eq2));
                if fit.joint.converged {
                    let j = &fit.joint;
                    let est = j.params().iter().copied().collect();
                    let se = (0..j.vcov.nrows()).map(|k| j.vcov[(k, k)].max(0.0).sqrt()).collect();
                    out.joint = Some((est, se));
                    out.lr_reject = crate::biprobit::lr_test_rho(j, &fit.eq1, &fit.eq2)
                        .ok()
                        .map(|t| t.reject);
                } else {
                    out.failures.push(fail("joint", &"did not converge"));
                }
            }
            Err(e) => out.failures.push(fail("fit", &e)),
        }
    } else {
        let fits = complete_rows(&ds, &[&spec.eq1, &spec.eq2]).and_then(|rows| {
            let f1 = fit_design(&spec.eq1, &Design::build(&spec.eq1, &ds, &rows)?, &opts.probit)?;
            let f2 = fit_design(&spec.eq2, &Design::build(&spec.eq2, &ds, &rows)?, &opts.probit)?;
            Ok((f1, f2))
        });
        match fits {
            Ok((f1, f2)) => out.independent = Some(stacked(&f1, &f2)),
            Err(e) => out.failures.push(fail("univariate", &e)),
        }
    }
    for f in &out.failures {
        log::warn!("replication {}: {} failed: {}", f.rep, f.stage, f.message);
    }
    out
}

fn summarize(names: &[String], truth: &[f64], draws: &[&(Vec<f64>, Vec<f64>)]) -> Vec<ParamSummary> {
    if draws.is_empty() {
        return Vec::new();
    }
    let m = draws.len() as f64;
    names
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(k, (name, &t))| {
            let mean = draws.iter().map(|d| d.0[k]).sum::<f64>() / m;
            let mse = draws.iter().map(|d| (d.0[k] - t).powi(2)).sum::<f64>() / m;
            let hits = draws
                .iter()
                .filter(|d| (d.0[k] - t).abs() <= Z_95 * d.1[k])
                .count();
            ParamSummary {
                name: name.clone(),
                truth: t,
                mean,
                bias: mean - t,
                rmse: mse.sqrt(),
                coverage: hits as f64 / m,
            }
        })
        .collect()
}

fn rate(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for f in flags {
        total += 1;
        hits += usize::from(f);
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Runs `reps` independent replications. Separate univariate fits always
/// run; the joint model and LR test only with `fit_both`. Failed fits are
/// logged and counted.
pub fn monte_carlo(cfg: &DgpConfig, reps: usize, fit_both: bool) -> Result<McResult> {
    monte_carlo_with(cfg, reps, fit_both, &BiprobitOptions::default())
}

pub fn monte_carlo_with(
    cfg: &DgpConfig,
    reps: usize,
    fit_both: bool,
    opts: &BiprobitOptions,
) -> Result<McResult> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    cfg.validate()?;
    let spec = cfg.spec();
    spec.validate()?;

    let outcomes: Vec<RepOutcome> = (0..reps as u64)
        .into_par_iter()
        .map(|r| run_rep(cfg, r, fit_both, opts))
        .collect();

    let (names, truth) = cfg.truth();
    let k_indep = truth.len() - 1;
    let joint: Vec<_> = outcomes.iter().filter_map(|o| o.joint.as_ref()).collect();
    let indep: Vec<_> = outcomes.iter().filter_map(|o| o.independent.as_ref()).collect();

    let eta_pos = names.iter().position(|n| n == "eq2:y1");
    let eta_truth = eta_pos.map(|k| truth[k]);
    let flip = |d: &&(Vec<f64>, Vec<f64>)| {
        let k = eta_pos.expect("eta present");
        d.0[k].signum() != eta_truth.expect("eta present").signum()
    };
    let insignificant = |d: &&(Vec<f64>, Vec<f64>)| {
        let k = eta_pos.expect("eta present");
        (d.0[k] / d.1[k]).abs() < Z_95
    };
    let (flip_rate, insig_rate, either_rate) = match eta_truth {
        Some(t) if t != 0.0 => (
            rate(indep.iter().map(flip)),
            rate(indep.iter().map(insignificant)),
            rate(indep.iter().map(|d| flip(d) || insignificant(d))),
        ),
        Some(_) => (None, rate(indep.iter().map(insignificant)), None),
        None => (None, None, None),
    };

    let attempted = if fit_both { reps } else { 0 } + reps;
    let succeeded = if fit_both { joint.len() } else { 0 } + indep.len();
    Ok(McResult {
        replications: reps,
        n: cfg.n,
        seed: cfg.seed,
        fit_both,
        joint_successes: joint.len(),
        independent_successes: indep.len(),
        failure_rate: 1.0 - succeeded as f64 / attempted as f64,
        joint: summarize(&names, &truth, &joint),
        independent: summarize(&names[..k_indep], &truth[..k_indep], &indep),
        lr_rejection_rate: rate(outcomes.iter().filter_map(|o| o.lr_reject)),
        eta_sign_flip_rate: flip_rate,
        eta_insignificant_rate: insig_rate,
        eta_flip_or_insignificant_rate: either_rate,
        failures: outcomes.into_iter().flat_map(|o| o.failures).collect(),
    })
}
