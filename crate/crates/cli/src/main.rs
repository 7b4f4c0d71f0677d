use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gascert_cli::{commands, config, CliError, EXIT_INPUT};
use gascert_core::Mode;

/// Global-asymptotic-stability certificates for interconnected adaptive
/// control networks.
#[derive(Parser)]
#[command(name = "gascert", version)]
struct Cli {
    /// Override solver tolerances (bisection tolerance of the distance to
    /// instability).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate (M, Φ) comparison-system test.
    Connective { config: PathBuf },
    /// Per-subsystem distance margin and Riccati certificate.
    Riccati {
        config: PathBuf,
        /// Bound Ξ² by max(incoming, outgoing) edge energy.
        #[arg(long)]
        strict: bool,
    },
    /// Pairwise H∞ small-gain loops.
    Smallgain { config: PathBuf },
    /// Closed-loop simulation of the config's scenario.
    Simulate {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "dist")]
        mode: ModeArg,
        /// CSV trace destination.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dec,
    Dist,
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::Connective { config } => commands::connective(&config::load(&config)?),
        Command::Riccati { config, strict } => commands::riccati(&config::load(&config)?, cli.tol, strict),
        Command::Smallgain { config } => commands::small_gain(&config::load(&config)?),
        Command::Simulate {
            config,
            mode,
            out,
            strict,
        } => {
            let mode = match mode {
                ModeArg::Dec => Mode::Decentralized,
                ModeArg::Dist => Mode::Distributed,
            };
            commands::simulate(&config::load(&config)?, mode, cli.tol, strict, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    if let Some(t) = cli.tol {
        if !t.is_finite() || t <= 0.0 {
            eprintln!("error: --tol must be finite and > 0, got {t}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    }
    match run(cli) {
        Ok(out) => {
            print!("{}", out.report);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
