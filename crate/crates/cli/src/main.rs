//! `hcberry`: writes Berry-curvature grids, semiclassical trajectories,
//! mapping results and lattice-oracle runs as CSV plus a JSON sidecar.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use honeycomb_berry::validate::Fault;

use config::{CommandDefaults, Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hcberry", version, about = "Berry curvature of biased and strained honeycomb lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[command(flatten)]
    overrides: Overrides,
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Band energy on a k grid and along ky = 0.
    Bands(Common),
    /// Closed-form, two-band and plaquette curvature, with the Chern number.
    Curvature(Common),
    /// Semiclassical sweeps from Γ at the standard force angles.
    Trajectory(Common),
    /// Curvature read out by the forward/backward force protocol.
    Map(Common),
    /// Dirac point separation and curvature extrema against strain.
    MergeScan(Common),
    /// Self-check suite; exits with 1 on any failure.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Deliberately break one formula (biased-sign).
        #[arg(long)]
        inject_fault: Option<Fault>,
        /// Leave out the finite-lattice check.
        #[arg(long)]
        skip_oracle: bool,
    },
    /// Wave packets on a finite flake under the difference protocol.
    Packet(Common),
}

fn resolve(common: Common, defaults: CommandDefaults) -> Result<RunConfig, CliError> {
    RunConfig::resolve(common.overrides, common.config.as_deref(), defaults)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let semiclassical = CommandDefaults { grid: 201, dt: 1e-4 };
    match cli.command {
        Command::Bands(c) => commands::bands(&resolve(c, semiclassical)?),
        Command::Curvature(c) => commands::curvature(&resolve(c, semiclassical)?),
        Command::Trajectory(c) => commands::trajectory(&resolve(c, semiclassical)?),
        Command::Map(c) => commands::map(&resolve(c, CommandDefaults { grid: 121, ..semiclassical })?),
        Command::MergeScan(c) => commands::merge_scan(&resolve(c, semiclassical)?),
        Command::Validate { common, inject_fault, skip_oracle } => {
            let cfg = resolve(common, semiclassical)?;
            if commands::validate(&cfg, inject_fault, skip_oracle)? {
                Ok(())
            } else {
                Err(CliError::Validation("one or more checks failed".into()))
            }
        }
        Command::Packet(c) => commands::packet(&resolve(c, CommandDefaults { dt: 5e-3, ..semiclassical })?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hcberry: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
