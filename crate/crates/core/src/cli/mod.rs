//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verdict or residual mismatch, 2 config error,
//! 3 numerical failure.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::biharmonic::Verdict;
use crate::odesol::Sign;
use commands::{OdeArgs, OdeCase, Outcome, EXIT_CONFIG, EXIT_OK};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "sspace", version, about = "Slant and f-biharmonic curve diagnostics in R^(2m+s)(-3s)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CaseArg {
    I,
    Ii,
    Iii,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline on the configured curve.
    Verify {
        config: PathBuf,
        /// JSON report path (overrides output.report; default stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-sample CSV path (overrides output.csv).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Expected verdict (overrides the config).
        #[arg(long)]
        expected: Option<String>,
    },
    /// Integrate the configured synthesis spec and write the trace CSV.
    Synth {
        config: PathBuf,
        /// Trace CSV path (overrides output.trace; default stdout).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also run the verify pipeline on the synthesized trace.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a closed-form solution of the curvature ODE over a range.
    Ode {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        c2: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        c3: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        c4: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// start:end:step
        #[arg(long, default_value = "-2:2:0.01", allow_hyphen_values = true)]
        range: String,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// CSV path (default stdout).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: Option<&Path>, text: Option<&String>) -> Result<(), String> {
    match (path, text) {
        (Some(p), Some(t)) => std::fs::write(p, t).map_err(|e| format!("cannot write {}: {e}", p.display())),
        _ => Ok(()),
    }
}

fn load(path: &Path) -> Result<RunConfig, Outcome> {
    RunConfig::from_path(path).map_err(|e| Outcome {
        code: EXIT_CONFIG,
        report: None,
        csv: None,
        message: e.to_string(),
    })
}

fn finish(outcome: Outcome, writes: Result<(), String>) -> i32 {
    eprintln!("{}", outcome.message);
    if let Err(e) = writes {
        eprintln!("{e}");
        return EXIT_CONFIG;
    }
    outcome.code
}

/// Parses arguments and runs a command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Verify { config, report, csv, expected } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(o) => return finish(o, Ok(())),
            };
            if let Some(v) = expected {
                match v.as_str() {
                    "any" => cfg.expected = None,
                    s => match Verdict::parse(s) {
                        Some(v) => cfg.expected = Some(v),
                        None => {
                            eprintln!("unknown expected verdict {s:?}");
                            return EXIT_CONFIG;
                        }
                    },
                }
            }
            let o = commands::cmd_verify(&cfg);
            let report_path = report.or(cfg.output.report.clone());
            let csv_path = csv.or(cfg.output.csv.clone());
            let writes = o
                .report
                .as_ref()
                .map(|r| write_or_print(report_path.as_deref(), r))
                .unwrap_or(Ok(()))
                .and_then(|_| write_file(csv_path.as_deref(), o.csv.as_ref()));
            finish(o, writes)
        }
        Command::Synth { config, output, verify, report } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(o) => return finish(o, Ok(())),
            };
            let o = commands::cmd_synth(&cfg, verify);
            let trace_path = output.or(cfg.output.trace.clone());
            let report_path = report.or(cfg.output.report.clone());
            let writes = o
                .csv
                .as_ref()
                .map(|c| write_or_print(trace_path.as_deref(), c))
                .unwrap_or(Ok(()))
                .and_then(|_| write_file(report_path.as_deref(), o.report.as_ref()));
            finish(o, writes)
        }
        Command::Ode { case, c2, c3, c4, lambda, range, branch, tol, output, report } => {
            let range = match commands::parse_range(&range) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return EXIT_CONFIG;
                }
            };
            let args = OdeArgs {
                case: match case {
                    CaseArg::I => OdeCase::I,
                    CaseArg::Ii => OdeCase::II,
                    CaseArg::Iii => OdeCase::III,
                },
                c2,
                c3,
                c4,
                lambda,
                range,
                branch: match branch {
                    BranchArg::Plus => Sign::Plus,
                    BranchArg::Minus => Sign::Minus,
                },
                tol,
            };
            let o = commands::cmd_ode(&args);
            let writes = o
                .csv
                .as_ref()
                .map(|c| write_or_print(output.as_deref(), c))
                .unwrap_or(Ok(()))
                .and_then(|_| write_file(report.as_deref(), o.report.as_ref()));
            finish(o, writes)
        }
    }
}
