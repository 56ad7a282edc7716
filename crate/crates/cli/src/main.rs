//! `optospec`: spectra, asymmetries, eigenmodes, simulations, fits and
//! parameter sweeps from a JSON operating point.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid
//! configuration, 3 unstable parameters, 4 fit not converged.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Kind, Setup, SweepParam};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "optospec", version, about = "Spectra and fits for two-axis levitated optomechanics")]
struct Cli {
    /// Warn about unknown config keys instead of rejecting them.
    #[arg(long, global = true)]
    allow_unknown: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a model spectrum on the config grid.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Relative Gaussian noise for synthetic heterodyne data.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sideband asymmetry S(−ω)/S(ω) for f > 0.
    Asymmetry {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normal-mode frequencies, linewidths and stability.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stochastic simulation; writes the Welch PSD of the bright mode.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Deterministic response to `sim.initial`.
        #[arg(long)]
        zero_noise: bool,
        /// Also dump the first trajectory's quadratures here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Keep every n-th trajectory sample.
        #[arg(long, default_value_t = 1)]
        decimate: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Least-squares fit of heterodyne branches.
    Fit {
        /// Initial parameters and fit settings.
        #[arg(long)]
        config: PathBuf,
        /// Branch data as upper=PATH or lower=PATH; repeat for both.
        #[arg(long, value_parser = commands::parse_data_arg)]
        data: Vec<(optospec_core::Branch, PathBuf)>,
        /// JSON manifest of panels for a joint fit.
        #[arg(long)]
        panels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// One spectrum file per value of a swept parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Start value in degrees (theta) or Hz.
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, allow_hyphen_values = true)]
        step: f64,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("OPTOSPEC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config("OPTOSPEC_THREADS", format!("expected a positive integer, got `{raw}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(anyhow::Error::from)?;
    #[cfg(not(feature = "parallel"))]
    log::debug!("built without parallelism; OPTOSPEC_THREADS={n} has no effect");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let allow = cli.allow_unknown;
    match cli.command {
        Command::Spectrum {
            config,
            kind,
            noise,
            seed,
            out,
        } => {
            let setup = Setup::load(&config, allow)?;
            commands::spectrum(&setup, &commands::SpectrumArgs { kind, noise, seed }, &out)
        }
        Command::Asymmetry { config, out } => commands::asymmetry(&Setup::load(&config, allow)?, &out),
        Command::Eigen { config, out } => commands::eigen(&Setup::load(&config, allow)?, &out),
        Command::Simulate {
            config,
            seed,
            zero_noise,
            trajectory,
            decimate,
            out,
        } => {
            let setup = Setup::load(&config, allow)?;
            let args = commands::SimulateArgs {
                seed,
                zero_noise,
                trajectory,
                decimate,
            };
            commands::simulate(&setup, &args, &out)
        }
        Command::Fit {
            config,
            data,
            panels,
            out,
        } => {
            let setup = Setup::load(&config, allow)?;
            let args = commands::FitArgs {
                data,
                panels,
                allow_unknown: allow,
            };
            commands::fit(&setup, &args, &out)
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            step,
            kind,
            out,
        } => {
            let setup = Setup::load(&config, allow)?;
            let args = commands::SweepArgs {
                param,
                from,
                to,
                step,
                kind,
            };
            commands::sweep(&setup, &args, &out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
