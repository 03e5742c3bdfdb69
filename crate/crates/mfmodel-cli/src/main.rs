//! `mfmodel`: price, calibrate, smile and hedge runs over the Markov-functional model.
//!
//! Exit codes: 0 success, 1 bad input or usage, 2 numerical failure (details in
//! `<out>/diagnostics.json`). The log level is read from `MFMODEL_LOG`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::Settings;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl From<mfmodel::Error> for CliError {
    fn from(e: mfmodel::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

macro_rules! lib_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                mfmodel::Error::from(e).into()
            }
        }
    )*};
}

lib_error!(
    mfmodel::pricing::PricingError,
    mfmodel::mapping::MappingError,
    mfmodel::calibration::CalibrationError,
    mfmodel::analytic::AnalyticError
);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mfmodel", version, about = "Markov-functional swaption pricing, calibration and hedging")]
struct Cli {
    /// JSON file with the same keys as the long flags; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// European and Bermudan tables for the mapping cases.
    Price,
    /// Per-expiry smile fits for each model family.
    Calibrate,
    /// Implied-vol curves conditional on states of an earlier reset.
    FutureSmile,
    /// Today's smile before and after a curve bump with the model held fixed.
    SmileDynamics,
    /// Daily hedge backtest on a synthetic market.
    Hedge,
    /// The three-state toy lattice values.
    Fixtures,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Price => "price",
            Command::Calibrate => "calibrate",
            Command::FutureSmile => "future-smile",
            Command::SmileDynamics => "smile-dynamics",
            Command::Hedge => "hedge",
            Command::Fixtures => "fixtures",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = match &cli.config {
        Some(p) => cli.settings.clone().overlay(Settings::from_file(p)?),
        None => cli.settings.clone(),
    };
    let out = settings.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let result = match cli.command {
        Command::Price => commands::price(&settings, &out),
        Command::Calibrate => commands::calibrate(&settings, &out),
        Command::FutureSmile => commands::future_smile(&settings, &out),
        Command::SmileDynamics => commands::smile_dynamics(&settings, &out),
        Command::Hedge => commands::hedge(&settings, &out),
        Command::Fixtures => commands::fixtures(&out),
    };
    if let Err(CliError::Numerical(msg)) = &result {
        let diag = serde_json::json!({ "command": cli.command.name(), "error": msg, "settings": settings });
        let _ = std::fs::write(out.join("diagnostics.json"), serde_json::to_string_pretty(&diag).unwrap_or_default());
    }
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MFMODEL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Data(_) => ExitCode::from(1),
                CliError::Numerical(_) => ExitCode::from(2),
            }
        }
    }
}
