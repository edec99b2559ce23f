//! `dualcv`: batch front end for estimation, welfare, diagnostics and
//! simulation. Payloads go to `--out` or stdout, diagnostics to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Seed used when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 12345;

#[derive(Parser, Debug)]
#[command(name = "dualcv", version, about = "Two-vehicle contingent valuation: fit, welfare, diagnose, simulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Shared {
    /// Survey CSV.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// JSON column-to-role mapping for the CSV.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// JSON model specification.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Drop respondents whose open-ended answers contradict an accepted bid.
    #[arg(long, global = true)]
    pub filter: bool,
    /// Write the dropped respondents as JSON lines.
    #[arg(long, global = true)]
    pub exclusions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Probit,
    Biprobit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    SurveyLike,
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WageModeArg {
    Global,
    Respondent,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a single probit or the recursive bivariate probit.
    Fit {
        #[arg(long, value_enum, default_value_t = Model::Biprobit)]
        model: Model,
        /// Equation to fit with `--model probit` when the spec has two.
        #[arg(long, default_value_t = 1)]
        equation: u8,
        #[command(flatten)]
        shared: Shared,
    },
    /// Money, labor and total surplus from a fit artifact.
    Welfare {
        /// JSON written by `fit --model biprobit`.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long, default_value_t = dualcv::welfare::DEFAULT_SHADOW_RATIO)]
        shadow_ratio: f64,
        #[arg(long, value_enum, default_value_t = WageModeArg::Respondent)]
        wage_mode: WageModeArg,
        /// Market wages `slack,peak` replacing the sample means.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        wages: Option<Vec<f64>>,
        /// Parameter draws for simulated intervals; 0 disables them.
        #[arg(long, default_value_t = 0)]
        draws: usize,
        #[arg(long)]
        truncate_negative: bool,
        /// Use the equation-by-equation fits instead of the joint model.
        #[arg(long)]
        separate: bool,
        #[command(flatten)]
        shared: Shared,
    },
    /// Response patterns, starting-point anchoring and endowment tests.
    Diagnose {
        /// Variables compared across response patterns.
        #[arg(long, value_delimiter = ',')]
        variables: Vec<String>,
        #[arg(long)]
        bonferroni: bool,
        #[command(flatten)]
        shared: Shared,
    },
    /// Monte Carlo replications of a data-generating process.
    Simulate {
        /// JSON data-generating process; overrides `--preset`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Preset::SurveyLike)]
        preset: Preset,
        /// Sample size per replication; 194 for the presets.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        /// Skip the joint fit; only the separate probits are estimated.
        #[arg(long)]
        independent_only: bool,
        /// Directory for one CSV per replication.
        #[arg(long)]
        write_data: Option<PathBuf>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Descriptives, joint fit, marginal effects, welfare and diagnostics in
    /// one document.
    Report {
        #[arg(long, value_delimiter = ',')]
        variables: Vec<String>,
        #[command(flatten)]
        shared: Shared,
    },
}

/// A failure reported as one `field: message` line.
#[derive(Debug)]
pub struct Failure {
    pub field: String,
    pub message: String,
    pub code: u8,
}

impl Failure {
    pub fn input(field: &str, message: impl std::fmt::Display) -> Self {
        Self {
            field: field.to_string(),
            message: message.to_string().replace('\n', " "),
            code: 1,
        }
    }

    pub fn required(field: &str) -> Self {
        Self::input(field, "required")
    }
}

/// Exit code of a command that produced its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Fit { model, equation, shared } => commands::fit(&shared, model, equation),
        Command::Welfare {
            fit,
            shadow_ratio,
            wage_mode,
            wages,
            draws,
            truncate_negative,
            separate,
            shared,
        } => commands::welfare(
            &shared,
            &commands::WelfareArgs {
                fit,
                shadow_ratio,
                wage_mode,
                wages,
                draws,
                truncate_negative,
                separate,
            },
        ),
        Command::Diagnose {
            variables,
            bonferroni,
            shared,
        } => commands::diagnose(&shared, &variables, bonferroni),
        Command::Simulate {
            config,
            preset,
            n,
            reps,
            rho,
            eta,
            independent_only,
            write_data,
            shared,
        } => commands::simulate(
            &shared,
            &commands::SimulateArgs {
                config,
                preset,
                n,
                reps,
                rho,
                eta,
                independent_only,
                write_data,
            },
        ),
        Command::Report { variables, shared } => commands::report(&shared, &variables),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("args: {}", line.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Err(f) => {
            eprintln!("{}: {}", f.field, f.message);
            ExitCode::from(f.code)
        }
    }
}
