//! The one-factor Gaussian driver `dX = e^{a t} dW`, `X(0) = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("times must be positive and strictly increasing")]
    BadTimes,
    #[error("interval start {t} exceeds end {s}")]
    Reversed { t: f64, s: f64 },
    #[error("correlation needs 0 < t <= s, got t = {0}")]
    NonPositiveTime(f64),
    #[error("grid parameters must be positive")]
    BadGrid,
}

/// Mean reversion and the reset times the lattice lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DriverSpec<T> {
    pub mean_reversion: T,
    pub times: Vec<T>,
}

/// Nodes of one reset date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridDate<T> {
    pub time: T,
    /// Unconditional standard deviation of `X` at `time`.
    pub sd: T,
    pub spacing: T,
    pub nodes: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LatticeGrid<T> {
    pub steps_per_dev: usize,
    pub deviations: usize,
    pub dates: Vec<GridDate<T>>,
}

impl<T: Real> DriverSpec<T> {
    pub fn new(mean_reversion: T, times: Vec<T>) -> Result<Self, DriverError> {
        if times.is_empty() || times[0] <= T::zero() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DriverError::BadTimes);
        }
        Ok(Self { mean_reversion, times })
    }

    /// `int_t^s e^{2 a u} du`.
    pub fn variance(&self, t: T, s: T) -> Result<T, DriverError> {
        if t > s {
            return Err(DriverError::Reversed { t: t.to_f64().unwrap_or(f64::NAN), s: s.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(variance(self.mean_reversion, t, s))
    }

    /// Mean and variance of `X(s)` given `X(t) = x_t`.
    pub fn conditional_density(&self, s: T, t: T, x_t: T) -> Result<(T, T), DriverError> {
        if t >= s {
            return Err(DriverError::Reversed { t: t.to_f64().unwrap_or(f64::NAN), s: s.to_f64().unwrap_or(f64::NAN) });
        }
        Ok((x_t, variance(self.mean_reversion, t, s)))
    }

    /// Correlation of `X(t)` and `X(s)`.
    pub fn autocorrelation(&self, t: T, s: T) -> Result<T, DriverError> {
        autocorrelation(self.mean_reversion, t, s)
    }

    pub fn build_grid(&self, steps_per_dev: usize, deviations: usize) -> Result<LatticeGrid<T>, DriverError> {
        if steps_per_dev == 0 || deviations == 0 {
            return Err(DriverError::BadGrid);
        }
        let m = (steps_per_dev * deviations) as isize;
        let dates = self
            .times
            .iter()
            .map(|&time| {
                let sd = variance(self.mean_reversion, T::zero(), time).sqrt();
                let spacing = sd / from_usize(steps_per_dev);
                let nodes = (-m..=m)
                    .map(|k| {
                        let kk: T = lit(k as f64);
                        kk * spacing
                    })
                    .collect();
                GridDate { time, sd, spacing, nodes }
            })
            .collect();
        Ok(LatticeGrid { steps_per_dev, deviations, dates })
    }
}

/// `int_t^s e^{2 a u} du`, with the `a = 0` case handled exactly.
pub fn variance<T: Real>(a: T, t: T, s: T) -> T {
    if a == T::zero() {
        return s - t;
    }
    let two: T = lit(2.0);
    // e^{2at} (e^{2a(s-t)} - 1) / (2a) keeps precision for small a(s - t)
    (two * a * t).exp() * (two * a * (s - t)).exp_m1() / (two * a)
}

/// Correlation between `X(t)` and `X(s)`, `0 < t <= s`.
pub fn autocorrelation<T: Real>(a: T, t: T, s: T) -> Result<T, DriverError> {
    if !(t > T::zero()) {
        return Err(DriverError::NonPositiveTime(t.to_f64().unwrap_or(f64::NAN)));
    }
    if t > s {
        return Err(DriverError::Reversed { t: t.to_f64().unwrap_or(f64::NAN), s: s.to_f64().unwrap_or(f64::NAN) });
    }
    Ok((variance(a, T::zero(), t) / variance(a, T::zero(), s)).sqrt())
}
