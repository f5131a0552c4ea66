//! Command-line front end for the waveguide-emitter toolkit: synthesize
//! measurement sets, fit device parameters, reconstruct scattering
//! coefficients and the two-photon kernel, and predict observables with
//! selected imperfections toggled.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use wqed_cli::error::{self, CliError};
use wqed_cli::{config, fitcmd, predict, reconstruct, simulate};

#[derive(Parser)]
#[command(name = "wqed", version, about = "Few-photon scattering toolkit for a waveguide-coupled emitter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic measurement set from a configuration.
    Simulate {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Shot-noise seed; the same seed reproduces files byte for byte.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for scans.csv and g2_*.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate device parameters from a measurement directory.
    Fit {
        /// Directory holding scans.csv and optional g2_*.csv files.
        #[arg(long)]
        data: PathBuf,
        /// Experiment description; supplies starting values, the free list
        /// and the weighting scheme.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for fit_result.toml and fit_report.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert measured data into scattering coefficients and the
    /// two-photon kernel.
    Reconstruct {
        /// Directory holding scans.csv and optional g2_*.csv files.
        #[arg(long)]
        data: PathBuf,
        /// Parameter source: a fit_result.toml or a configuration file.
        #[arg(long)]
        params: PathBuf,
        /// Output directory for transmission/reflection/kernel/sector CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the forward model with chosen imperfections enabled.
    Predict {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Comma list from {sd, irf, background}, or all / none.
        #[arg(long, default_value = "all")]
        toggles: String,
        /// Output directory for model CSVs.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { config, seed, out } => {
            let loaded = config::load(&config)?;
            std::fs::create_dir_all(&out).map_err(|e| error::io_data(&out, e))?;
            simulate::run(&loaded, seed, &out)
        }
        Command::Fit { data, config, out } => {
            let loaded = config::load(&config)?;
            std::fs::create_dir_all(&out).map_err(|e| error::io_data(&out, e))?;
            fitcmd::run(&data, &loaded, &out)
        }
        Command::Reconstruct { data, params, out } => {
            std::fs::create_dir_all(&out).map_err(|e| error::io_data(&out, e))?;
            reconstruct::run(&data, &params, &out)
        }
        Command::Predict {
            config,
            toggles,
            out,
        } => {
            let loaded = config::load(&config)?;
            let toggles = predict::parse_toggles(&toggles)?;
            std::fs::create_dir_all(&out).map_err(|e| error::io_data(&out, e))?;
            predict::run(&loaded, toggles, &out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
