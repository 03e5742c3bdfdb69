use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{bracket, check_increasing, MarketError};

/// Interpolation variable between curve nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveInterpolation {
    /// Linear in the continuously compounded zero rate `-ln D / day`; flat rate before the first node.
    #[default]
    LinearZeroRate,
    /// Linear in the discount factor itself, anchored at `D(0) = 1`.
    LinearDiscount,
}

/// Discount factors on integer day offsets from an anchor date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldCurve {
    pub anchor: Option<NaiveDate>,
    days: Vec<f64>,
    dfs: Vec<f64>,
    pub interpolation: CurveInterpolation,
}

impl YieldCurve {
    pub fn new(
        anchor: Option<NaiveDate>,
        points: &[(i64, f64)],
        interpolation: CurveInterpolation,
    ) -> Result<Self, MarketError> {
        if points.is_empty() {
            return Err(MarketError::Empty("yield curve"));
        }
        let days: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
        let dfs: Vec<f64> = points.iter().map(|p| p.1).collect();
        if days[0] <= 0.0 {
            return Err(MarketError::NonPositive { what: "curve day offset", value: days[0] });
        }
        check_increasing(&days, "curve day offsets")?;
        if let Some(&bad) = dfs.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(MarketError::NonPositive { what: "discount factor", value: bad });
        }
        Ok(Self { anchor, days, dfs, interpolation })
    }

    pub fn points(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.days.iter().zip(&self.dfs).map(|(&d, &f)| (d as i64, f))
    }

    pub fn last_day(&self) -> i64 {
        *self.days.last().unwrap() as i64
    }

    pub fn with_interpolation(mut self, interpolation: CurveInterpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    /// Discount factor at an integer day offset; no extrapolation past the last node.
    pub fn discount_factor(&self, day: i64) -> Result<f64, MarketError> {
        self.discount_factor_at(day as f64)
    }

    /// As [`discount_factor`](Self::discount_factor) for a fractional day offset.
    pub fn discount_factor_at(&self, day: f64) -> Result<f64, MarketError> {
        let last = *self.days.last().unwrap();
        if !(day >= 0.0 && day <= last) {
            return Err(MarketError::OutOfRange { what: "curve day", value: day, lo: 0.0, hi: last });
        }
        if day == 0.0 {
            return Ok(1.0);
        }
        match self.interpolation {
            CurveInterpolation::LinearDiscount => {
                if day <= self.days[0] {
                    let w = day / self.days[0];
                    return Ok(1.0 + w * (self.dfs[0] - 1.0));
                }
                let (i, w) = bracket(&self.days, day);
                Ok(self.dfs[i] + w * (self.dfs[i + 1] - self.dfs[i]))
            }
            CurveInterpolation::LinearZeroRate => {
                if let Ok(i) = self.days.binary_search_by(|d| d.partial_cmp(&day).unwrap()) {
                    return Ok(self.dfs[i]);
                }
                Ok((-self.zero_rate_unchecked(day) * day).exp())
            }
        }
    }

    fn zero_rate_unchecked(&self, day: f64) -> f64 {
        let r = |i: usize| -self.dfs[i].ln() / self.days[i];
        if day <= self.days[0] {
            return r(0);
        }
        let (i, w) = bracket(&self.days, day);
        r(i) + w * (r(i + 1) - r(i))
    }

    /// Continuously compounded zero rate per day.
    pub fn zero_rate(&self, day: f64) -> Result<f64, MarketError> {
        let df = self.discount_factor_at(day)?;
        if day == 0.0 {
            return Ok(self.zero_rate_unchecked(self.days[0]));
        }
        Ok(-df.ln() / day)
    }

    /// Shifts every node by `shift` in continuously compounded annual (ACT/365) zero rate.
    pub fn parallel_shift(&self, shift: f64) -> Self {
        let dfs = self.days.iter().zip(&self.dfs).map(|(&d, &f)| f * (-shift * d / 365.0).exp()).collect();
        Self { anchor: self.anchor, days: self.days.clone(), dfs, interpolation: self.interpolation }
    }
}
