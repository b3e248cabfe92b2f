//! `mginf`: transient M|G|∞ tables, monotonicity reports, busy periods and
//! Monte Carlo comparisons from JSON scenario files.

mod commands;
mod output;
mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Body, Outcome};
use scenario::{GridSpec, Kind, Resolved, Scenario};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(String),
}

impl From<mginf_core::Error> for CliError {
    fn from(e: mginf_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "mginf", version, about = "Transient analysis of the M|G|∞ queue from a busy-period start")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON scenario file; flags override its fields.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output file (default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Service law as inline JSON, e.g. '{"family":"exponential","params":{"alpha":1}}'.
    #[arg(long, global = true)]
    model: Option<String>,

    /// Arrival rate (defaults to the model's own λ where it has one).
    #[arg(long, global = true)]
    lambda: Option<f64>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    replications: Option<u64>,

    /// Time grid as start:stop:points.
    #[arg(long, global = true)]
    grid: Option<GridSpec>,

    #[arg(long, global = true)]
    n_max: Option<usize>,

    /// Format of tabular output. Reports are always JSON.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// G, density and hazard on the grid.
    Dist,
    /// State probabilities for a busy-period origin.
    Transient,
    /// Mean and variance of the occupancy.
    Moments,
    /// Hazard condition for a non-decreasing mean or variance. Exits 1 when violated.
    CheckMonotone {
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Busy-period CDF; atom and diagnostics go to a JSON sidecar.
    BusyPeriod,
    /// Monte Carlo estimates with standard errors.
    Simulate,
    /// Engine against simulation. Exits 1 when any check fails.
    Compare,
}

fn scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let mut s = match &cli.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    if let Some(m) = &cli.model {
        s.model = Some(
            serde_json::from_str(m)
                .map_err(|e| CliError::Validation(format!("bad --model: {e}")))?,
        );
    }
    s.lambda = cli.lambda.or(s.lambda);
    s.sim.seed = cli.seed.or(s.sim.seed);
    s.sim.replications = cli.replications.or(s.sim.replications);
    s.grid = cli.grid.or(s.grid);
    s.n_max = cli.n_max.or(s.n_max);
    if let Command::CheckMonotone { kind: Some(k) } = cli.command {
        s.kind = Some(k);
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let resolved = Resolved::new(scenario(cli)?)?;
    match cli.command {
        Command::Dist => commands::dist(&resolved),
        Command::Transient => commands::transient(&resolved),
        Command::Moments => commands::moments(&resolved),
        Command::CheckMonotone { .. } => {
            let kind = resolved.scenario.kind.unwrap_or(Kind::Mean);
            commands::check_monotone(&resolved, kind)
        }
        Command::BusyPeriod => commands::busy_period(&resolved),
        Command::Simulate => commands::simulate(&resolved),
        Command::Compare => commands::compare(&resolved),
    }
}

fn write_to(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> std::io::Result<()> {
    let text = match &outcome.body {
        Body::Table(t) => match cli.format {
            Format::Csv => t.to_csv(),
            Format::Json => t.to_json(),
        },
        Body::Json(s) => s.clone(),
    };
    write_to(cli.out.as_deref(), &text)?;
    if let Some(meta) = &outcome.sidecar {
        match &cli.out {
            Some(p) => {
                let mut name = p.as_os_str().to_owned();
                name.push(".meta.json");
                std::fs::write(PathBuf::from(name), meta)?;
            }
            None => std::io::stderr().lock().write_all(meta.as_bytes())?,
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => match emit(&cli, &outcome) {
            Ok(()) => ExitCode::from(u8::from(outcome.failed)),
            Err(e) => {
                eprintln!("error: cannot write output: {e}");
                ExitCode::from(3)
            }
        },
        Err(CliError::Validation(msg)) => {
            eprintln!("validation error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric error: {msg}");
            ExitCode::from(3)
        }
    }
}
