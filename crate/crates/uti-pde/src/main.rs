use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uti_pde::harness::{self, HarnessError, ScenarioConfig, BUILTINS};

/// Finite-interval heat and linear KdV solves by half-line decomposition.
#[derive(Parser)]
#[command(name = "uti-pde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, evaluate the decomposition residual and write reports.
    Run {
        /// Scenario file (flat TOML).
        #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
        config: Option<PathBuf>,
        /// Run a shipped scenario instead of a file.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(BUILTINS))]
        builtin: Option<String>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the contraction certificate only.
    Check { config: PathBuf },
}

fn configure_threads() -> Result<(), HarnessError> {
    let Ok(raw) = std::env::var("UTI_PDE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HarnessError::Config(format!("UTI_PDE_THREADS must be a positive integer, got `{raw}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| HarnessError::Config(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, builtin, out } => {
            let mut cfg = match (config, builtin) {
                (_, Some(name)) => ScenarioConfig::builtin(&name).expect("clap restricts builtin names"),
                (Some(path), None) => ScenarioConfig::from_path(&path)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let outcome = harness::run_scenario(&cfg)?;
            harness::emit_report(&outcome, &cfg.output_dir)?;
            println!("{}", outcome.summary());
        }
        Command::Check { config } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            println!("{}", harness::check(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uti-pde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
