use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

/// Occupation dynamics of an oscillator fully coupled to fermionic and bosonic Drude baths.
#[derive(Parser, Debug)]
#[command(name = "mixbath", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct GridArgs {
    /// horizon in units of 1/Omega
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    /// step in units of 1/Omega
    #[arg(long, default_value_t = 0.005)]
    pub dt: f64,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// directory for CSV files and the run manifest
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    ClosedForm,
    Diffusion,
    Volterra,
    Discrete,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleArg {
    Cubic,
    Trapezoid,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableArg {
    Occupation,
    Friction,
    Diffusion,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// friction, diffusion and per-bath partials on the grid
    Transport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// occupation trajectory
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "diffusion")]
        method: MethodArg,
        /// cumulative rule of the diffusion path
        #[arg(long, value_enum, default_value = "cubic")]
        rule: RuleArg,
        /// modes per bath for the discrete method
        #[arg(long, default_value_t = 400)]
        modes: usize,
    },
    /// asymptotic occupations, Markov limit and stationarity residual
    Asymptote {
        #[command(flatten)]
        common: Common,
    },
    /// late-time oscillation analysis over a parameter range
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// Omega, n0, alpha.K, gamma.K or temperature.K
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, value_enum, default_value = "occupation")]
        observable: ObservableArg,
        /// trailing fraction of the horizon used for classification
        #[arg(long, default_value_t = 0.4)]
        window: f64,
        /// half peak-to-peak below which a window counts as stationary
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
    },
    /// invariant suite over randomized scenarios
    Verify {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Err(msg) = commands::configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match commands::run(cli.command, argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
