use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::schedule::{add_months, roll_date, DateRoll};
use super::{CurveInterpolation, MarketError, YieldCurve};
use crate::roots::brent;

/// Simple-interest ACT/360 deposit from the anchor date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deposit {
    pub days: i64,
    pub rate: f64,
}

/// Spot-starting swap with an annual ACT/360 fixed leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParSwap {
    pub years: u32,
    pub rate: f64,
}

impl ParSwap {
    /// Fixed-leg payment day offsets from `anchor`.
    pub fn payment_days(&self, anchor: NaiveDate) -> Vec<i64> {
        (1..=self.years)
            .map(|k| (roll_date(add_months(anchor, 12 * k), DateRoll::ModifiedFollowing) - anchor).num_days())
            .collect()
    }

    /// Fixed-leg annuity `sum alpha_k D(t_k)`.
    pub fn pvbp(&self, anchor: NaiveDate, curve: &YieldCurve) -> Result<f64, MarketError> {
        let days = self.payment_days(anchor);
        let mut prev = 0;
        let mut sum = 0.0;
        for d in days {
            sum += (d - prev) as f64 / 360.0 * curve.discount_factor(d)?;
            prev = d;
        }
        Ok(sum)
    }

    /// Par rate implied by `curve`.
    pub fn par_rate(&self, anchor: NaiveDate, curve: &YieldCurve) -> Result<f64, MarketError> {
        let last = *self.payment_days(anchor).last().unwrap();
        Ok((1.0 - curve.discount_factor(last)?) / self.pvbp(anchor, curve)?)
    }
}

pub fn deposit_discount(rate: f64, days: i64) -> f64 {
    1.0 / (1.0 + rate * days as f64 / 360.0)
}

/// Builds a curve from deposits then swaps, solving one new node per swap so that it reprices to par.
/// Coupon dates between nodes are read off the curve's own interpolation.
pub fn bootstrap_curve(
    anchor: NaiveDate,
    deposits: &[Deposit],
    swaps: &[ParSwap],
    interpolation: CurveInterpolation,
) -> Result<YieldCurve, MarketError> {
    let mut points: Vec<(i64, f64)> = Vec::new();
    for d in deposits {
        if points.last().is_some_and(|p| p.0 >= d.days) || d.days <= 0 {
            return Err(MarketError::NotIncreasing("deposit tenors"));
        }
        let df = deposit_discount(d.rate, d.days);
        if !(df > 0.0) {
            return Err(MarketError::Bootstrap(format!("deposit {} days gives discount factor {df}", d.days)));
        }
        points.push((d.days, df));
    }
    let mut last_years = 0;
    for s in swaps {
        if s.years <= last_years {
            return Err(MarketError::NotIncreasing("swap tenors"));
        }
        last_years = s.years;
        let pay = s.payment_days(anchor);
        let end = *pay.last().unwrap();
        if points.last().is_some_and(|p| p.0 >= end) {
            return Err(MarketError::Bootstrap(format!("{}y swap ends inside existing curve", s.years)));
        }
        let residual = |df_end: f64| -> f64 {
            let mut trial = points.clone();
            trial.push((end, df_end));
            let c = match YieldCurve::new(Some(anchor), &trial, interpolation) {
                Ok(c) => c,
                Err(_) => return f64::NAN,
            };
            let mut prev = 0;
            let mut annuity = 0.0;
            for &d in &pay {
                annuity += (d - prev) as f64 / 360.0 * c.discount_factor(d).unwrap();
                prev = d;
            }
            1.0 - df_end - s.rate * annuity
        };
        let (lo, hi) = (1e-10, 4.0);
        if residual(lo) < 0.0 {
            return Err(MarketError::Bootstrap(format!("{}y swap at {} needs a non-positive discount factor", s.years, s.rate)));
        }
        let df = brent(residual, lo, hi, 1e-16, 1e-16, 200)
            .map_err(|e| MarketError::Bootstrap(format!("{}y swap: {e}", s.years)))?;
        points.push((end, df));
    }
    YieldCurve::new(Some(anchor), &points, interpolation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_deposit() {
        let a = NaiveDate::from_ymd_opt(2004, 5, 28).unwrap();
        let c = bootstrap_curve(a, &[Deposit { days: 365, rate: 0.02 }], &[], CurveInterpolation::LinearZeroRate).unwrap();
        let want = 1.0 / (1.0 + 0.02 * 365.0 / 360.0);
        assert!((c.discount_factor(365).unwrap() - want).abs() < 1e-15);
    }
}
