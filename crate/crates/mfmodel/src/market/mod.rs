//! Yield curves, ATM vol surfaces, smile ratio cubes, schedules and the curve bootstrap.

mod bootstrap;
mod curve;
pub mod datasets;
mod io;
mod schedule;
mod vol;

pub use bootstrap::{bootstrap_curve, deposit_discount, Deposit, ParSwap};
pub use curve::{CurveInterpolation, YieldCurve};
pub use io::{load_atm_surface, load_curve, load_ratio_cube, read_atm_surface, read_curve, read_ratio_cube};
pub use schedule::{add_months, roll_date, DateRoll, DayCount, TenorStructure, TradeSpec};
pub use vol::{AtmVolSurface, SmileRatioCube};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{what} {value} outside [{lo}, {hi}]")]
    OutOfRange { what: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("{0} must be strictly increasing")]
    NotIncreasing(&'static str),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("ratio cube: {0}")]
    RatioCube(String),
    #[error("bootstrap failed: {0}")]
    Bootstrap(String),
    #[error("schedule: {0}")]
    Schedule(String),
}

pub(crate) fn check_increasing(xs: &[f64], what: &'static str) -> Result<(), MarketError> {
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MarketError::NotIncreasing(what));
    }
    Ok(())
}

/// Index `i` with `xs[i] <= x <= xs[i + 1]` and the weight of `xs[i + 1]`; `x` must lie inside.
pub(crate) fn bracket(xs: &[f64], x: f64) -> (usize, f64) {
    if xs.len() == 1 {
        return (0, 0.0);
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => (i.max(1) - 1).min(xs.len() - 2),
    };
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    (i, w)
}
