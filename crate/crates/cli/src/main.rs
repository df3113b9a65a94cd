//! `sloshctl <simulate|eigen|control|verify> --config <path> [--out <dir>]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical
//! non-convergence (or a failed verification check), 1 anything else.
//! `SLOSHCTL_THREADS` is reserved and currently ignored.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Mode;

#[derive(Parser)]
#[command(
    name = "sloshctl",
    version,
    about = "Run sloshing scenarios from config files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Scenario {
    /// Scenario file (key = value lines with [section] headers).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` or `out/<config stem>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the wave equation; writes trajectory.csv.
    Simulate(Scenario),
    /// Sloshing modes; writes modes.csv.
    Eigen(Scenario),
    /// Synthesize a localized control; writes control.csv and trajectory.csv.
    Control(Scenario),
    /// Run the identity and invariant suite.
    Verify(Scenario),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, s) = match cli.command {
        Command::Simulate(s) => (Mode::Simulate, s),
        Command::Eigen(s) => (Mode::Eigen, s),
        Command::Control(s) => (Mode::Control, s),
        Command::Verify(s) => (Mode::Verify, s),
    };
    let code = run::run(mode, &s.config, s.out.as_deref());
    if code != run::EXIT_OK {
        eprintln!(
            "sloshctl: {} finished with exit code {code}; see report.txt",
            mode.name()
        );
    }
    ExitCode::from(code as u8)
}
