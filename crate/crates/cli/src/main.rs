//! `relaxflow` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 validation or parse error, 3 solver
//! non-convergence or infeasibility, 4 verification failure.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "relaxflow", version, about = "Extended AC power flow and its convex relaxations")]
pub struct Cli {
    /// Zero line charging and bus shunts and set every transformer to 1 before running.
    #[arg(long, global = true)]
    pub degenerate: bool,
    /// Human-readable report instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a case, then write it in native format.
    Parse(ParseArgs),
    /// Newton power flow at the case's generator setpoints.
    Pf(PfArgs),
    /// Solve a relaxation of the case.
    Relax(RelaxArgs),
    /// Sample both relaxations and check the point maps between them.
    Verify(VerifyArgs),
    /// Random sweep of the branch flow identities.
    Identities(IdentitiesArgs),
}

#[derive(Args, Debug)]
pub struct CaseArg {
    pub case_path: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Matpower,
    Native,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    #[command(flatten)]
    pub case: CaseArg,
    /// Destination of the native file; the native document goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PfArgs {
    #[command(flatten)]
    pub case: CaseArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Soc,
    Cdf,
    CdfReal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Feasibility,
    Cost,
}

#[derive(Args, Debug)]
pub struct RelaxArgs {
    #[command(flatten)]
    pub case: CaseArg,
    #[arg(long, value_enum, default_value_t = Model::Soc)]
    pub model: Model,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Cost)]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub case: CaseArg,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    #[arg(long, env = "RELAXFLOW_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Test hook: perturb one branch of every mapped point, as `BRANCH:DELTA`.
    #[arg(long, hide = true, value_parser = parse_corruption)]
    pub corrupt: Option<(usize, f64)>,
}

#[derive(Args, Debug)]
pub struct IdentitiesArgs {
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, env = "RELAXFLOW_SEED", default_value_t = 0)]
    pub seed: u64,
}

fn parse_corruption(s: &str) -> Result<(usize, f64), String> {
    let (branch, delta) = s.split_once(':').ok_or("expected BRANCH:DELTA")?;
    let branch = branch.parse().map_err(|e| format!("branch: {e}"))?;
    let delta = delta.parse().map_err(|e| format!("delta: {e}"))?;
    Ok((branch, delta))
}

/// Why a command stopped early. Each variant maps to one exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    /// Parse or validation failure, with one line per violation.
    Input { message: String, details: Vec<String> },
}

/// A finished command: its report and exit code.
pub struct Outcome {
    pub report: report::Report,
    pub code: u8,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.report.render(cli.pretty));
            ExitCode::from(outcome.code)
        }
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input { message, details }) => {
            eprintln!("error: {message}");
            for line in details {
                eprintln!("  {line}");
            }
            ExitCode::from(EXIT_INPUT)
        }
    }
}
