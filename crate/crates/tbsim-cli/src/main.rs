//! `tbsim`: run experiments from configuration files.
//!
//! Exit codes: 0 on success, 2 for invalid input (configuration, overrides,
//! flags), 3 for runtime and numerical failures.

mod commands;
mod manifest;
mod oracle;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "tbsim", version, about = "Photon-phonon time-bin entanglement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured experiment and its analysis chain.
    Simulate(RunArgs),
    /// Repeat a run over a list of phases or of any config value.
    Sweep(SweepArgs),
    /// Calibration sweep, sinusoid fits and the chosen CHSH settings.
    Calibrate(RunArgs),
    /// Cross-engine and analytic-limit checks.
    OracleCheck(OracleArgs),
    /// Analytic herald and coincidence rates.
    RateBudget(RunArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EngineArg {
    Fock,
    Gaussian,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Fock truncation when the Fock engine is used.
    #[arg(long)]
    truncation: Option<usize>,
    /// Output directory.
    #[arg(long, env = "TBSIM_OUT", default_value = "tbsim-out")]
    out: PathBuf,
    /// Dotted-path config override, e.g. `noise.interferometer_visibility=0.9`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    /// User overrides followed by the dedicated flags, which win.
    fn all_overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(t) = self.trials {
            o.push(format!("trials={t}"));
        }
        if let Some(e) = self.engine {
            o.push(format!("engine=\"{}\"", if matches!(e, EngineArg::Fock) { "fock" } else { "gaussian" }));
        }
        if let Some(n) = self.truncation {
            o.push(format!("truncation={n}"));
        }
        o
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Write phases in units of π, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 0.., conflicts_with = "set")]
    phi_w: Option<Vec<f64>>,
    /// Read phases in units of π; one curve per value.
    #[arg(long, value_delimiter = ',', num_args = 0.., requires = "phi_w")]
    phi_r: Option<Vec<f64>>,
    /// Config key to sweep, e.g. `pulses.write_energy`.
    #[arg(long, requires = "values")]
    set: Option<String>,
    /// Values of the swept key, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    circuits: usize,
    /// Largest number of modes in a random circuit.
    #[arg(long, default_value_t = 3)]
    max_modes: usize,
    #[arg(long, default_value_t = 8)]
    truncation: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "TBSIM_OUT", default_value = "tbsim-out")]
    out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<tbsim::Error>() {
        Some(e) if e.is_validation() => 2,
        Some(_) => 3,
        None if err.downcast_ref::<commands::UsageError>().is_some() => 2,
        None => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::OracleCheck(a) => commands::oracle_check(a),
        Command::RateBudget(a) => commands::rate_budget(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
