//! Command-line toolkit for quantum stochastic evolution equations.
//!
//! Exit codes: 0 success, 1 a verification gate failed (CI can gate on it),
//! 2 validation failure with a one-line machine-parsable reason on stderr
//! (prefixes E_FLAG, E_FILE, E_JSON, E_MODEL).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod commands;
mod output;

use output::CliError;

fn version_string() -> String {
    format!(
        "{} (schema {})",
        env!("CARGO_PKG_VERSION"),
        qsc_core::SCHEMA_VERSION
    )
}

#[derive(Parser)]
#[command(name = "qsc", about = "Quantum stochastic cocycle toolkit", version = version_string())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "text" => Ok(Format::Text),
        "json" => Ok(Format::Json),
        other => Err(format!("unknown format '{other}', expected text or json")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the Ito increment product table and the involution identity check
    Table {
        /// Noise dimension
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: Format,
    },
    /// Conditional-positivity and dissipation report for a model
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: Format,
    },
    /// Construct a dilation of the model's germ and verify it
    Dilate {
        #[arg(long)]
        model: PathBuf,
        /// Construction: explicit or kolmogorov
        #[arg(long, default_value = "explicit")]
        method: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Output JSON path for the dilation data
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: Format,
    },
    /// Simulate classical unraveling trajectories and ensemble statistics
    Run {
        #[arg(long)]
        model: PathBuf,
        /// diffusive or jump
        #[arg(long)]
        scheme: String,
        #[arg(long = "t-final")]
        t_final: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        ntraj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trajectory CSV output path
        #[arg(long)]
        out: PathBuf,
        /// Ensemble summary JSON output path
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Matrix JSON file(s); adds <psi|O|psi> columns to the CSV
        #[arg(long = "observable")]
        observables: Vec<PathBuf>,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: Format,
    },
    /// Integrate the averaged master equation (the trajectory oracle)
    Master {
        #[arg(long)]
        model: PathBuf,
        /// Initial density matrix JSON file
        #[arg(long)]
        rho0: PathBuf,
        #[arg(long = "t-final")]
        t_final: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: Format,
    },
    /// Integrate coherent-kernel dynamics for a family of test functions
    Kernel {
        #[arg(long)]
        model: PathBuf,
        /// JSON file {"functions": [{"d", "breakpoints", "values"}, ...]}
        #[arg(long)]
        coherent: PathBuf,
        #[arg(long = "t-final")]
        t_final: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
        /// Eigencheck the kernel Gram over functions x matrix units
        #[arg(long = "psd-check", default_value_t = false)]
        psd_check: bool,
        #[arg(long = "psd-tol", default_value_t = 1e-8)]
        psd_tol: f64,
        /// Also run the integral-recursion iterates and report the deviation
        #[arg(long)]
        picard: Option<usize>,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: Format,
    },
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Table { d, format } => commands::table::run(d, format),
        Command::Check { model, tol, format } => commands::check::run(&model, tol, format),
        Command::Dilate {
            model,
            method,
            tol,
            out,
            format,
        } => commands::dilate::run(&model, &method, tol, &out, format),
        Command::Run {
            model,
            scheme,
            t_final,
            dt,
            ntraj,
            seed,
            out,
            summary,
            observables,
            format,
        } => commands::run::run(
            &model,
            &scheme,
            t_final,
            dt,
            ntraj,
            seed,
            &out,
            summary.as_deref(),
            &observables,
            format,
        ),
        Command::Master {
            model,
            rho0,
            t_final,
            dt,
            out,
            format,
        } => commands::master::run(&model, &rho0, t_final, dt, &out, format),
        Command::Kernel {
            model,
            coherent,
            t_final,
            dt,
            out,
            psd_check,
            psd_tol,
            picard,
            format,
        } => commands::kernel::run(
            &model, &coherent, t_final, dt, &out, psd_check, psd_tol, picard, format,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let line = e.to_string();
            let line = line.lines().next().unwrap_or("bad arguments");
            eprintln!("E_FLAG: {line}");
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}
