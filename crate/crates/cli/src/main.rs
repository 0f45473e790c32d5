use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use wssus_capacity::scenario::{
    asymptotics_report, check_conditions, run_sweep, uwb_gain_report, Resolved, Scenario, Units,
};
use wssus_capacity::Error;

#[derive(Parser)]
#[command(name = "wssus-capacity", version, about = "Capacity bounds for peak-constrained WSSUS MIMO channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use a built-in scenario instead of a config file.
    #[arg(long, global = true, value_parser = ["fig1", "fig2", "fig3"], conflicts_with = "config")]
    preset: Option<String>,
    /// Monte Carlo seed; overrides the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rate units; overrides the scenario.
    #[arg(long, global = true)]
    units: Option<UnitsArg>,
    /// CSV output path (stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON report path (stdout if omitted, for report subcommands).
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate all bounds over the scenario's bandwidth sweep.
    Sweep,
    /// Sufficient-condition and Taylor-validity report at one bandwidth.
    CheckConditions {
        #[arg(long)]
        bandwidth: f64,
    },
    /// Wideband Taylor coefficient and first-order ratio ladders.
    Asymptotics,
    /// Gain of multi-eigenmode signalling over a single eigenmode.
    UwbGain {
        #[arg(long)]
        bandwidth: f64,
    },
    /// Sweep one of the built-in figure scenarios.
    Reproduce {
        #[arg(value_parser = ["fig1", "fig2", "fig3"])]
        figure: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Nats,
    Bits,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Nats => Units::Nats,
            UnitsArg::Bits => Units::Bits,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_numerical() { 3 } else { 2 };
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}

fn load(cli: &Cli) -> Result<Resolved, Error> {
    let (scenario, base) = match (&cli.command, &cli.config, &cli.preset) {
        (Command::Reproduce { figure }, _, _) => (Scenario::preset(figure)?, None),
        (_, Some(path), _) => (Scenario::from_file(path)?, path.parent().map(Path::to_path_buf)),
        (_, None, Some(name)) => (Scenario::preset(name)?, None),
        (_, None, None) => return Err(Error::InvalidScenario("either --config or --preset is required".into())),
    };
    let mut resolved = scenario.resolve(base.as_deref())?;
    if let Some(seed) = cli.seed {
        resolved = resolved.with_seed(seed);
    }
    if let Some(units) = cli.units {
        resolved = resolved.with_units(units.into());
    }
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    Ok(resolved)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let r = load(cli)?;
    match &cli.command {
        Command::Sweep | Command::Reproduce { .. } => {
            let result = run_sweep(&r)?;
            write_or_print(cli.out.as_deref(), &result.to_csv()?)?;
            let summary = json!({
                "scenario": result.name,
                "units": r.units.label(),
                "curves": result.summary(),
                "warnings": r.warnings,
            });
            if let Some(path) = &cli.report {
                write_or_print(Some(path), &to_json(&summary)?)?;
            } else if cli.out.is_some() {
                print!("{}", to_json(&summary)?);
            }
        }
        Command::CheckConditions { bandwidth } => {
            write_or_print(cli.report.as_deref(), &to_json(&check_conditions(&r, *bandwidth)?)?)?;
        }
        Command::Asymptotics => {
            write_or_print(cli.report.as_deref(), &to_json(&asymptotics_report(&r, None)?)?)?;
        }
        Command::UwbGain { bandwidth } => {
            write_or_print(cli.report.as_deref(), &to_json(&uwb_gain_report(&r, *bandwidth)?)?)?;
        }
    }
    Ok(())
}
