use chrono::{Datelike, Months, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::MarketError;
use crate::analytic::OptionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayCount {
    #[default]
    Act360,
    Act365,
    /// ACT/365.25, used for model and option time.
    Act36525,
}

impl DayCount {
    pub fn denominator(self) -> f64 {
        match self {
            DayCount::Act360 => 360.0,
            DayCount::Act365 => 365.0,
            DayCount::Act36525 => 365.25,
        }
    }

    pub fn year_fraction_days(self, days: i64) -> f64 {
        days as f64 / self.denominator()
    }

    pub fn year_fraction(self, from: NaiveDate, to: NaiveDate) -> f64 {
        self.year_fraction_days((to - from).num_days())
    }
}

/// Business-day convention on a weekend-only calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateRoll {
    Unadjusted,
    Following,
    #[default]
    ModifiedFollowing,
}

fn is_weekend(d: NaiveDate) -> bool {
    matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

pub fn roll_date(d: NaiveDate, roll: DateRoll) -> NaiveDate {
    match roll {
        DateRoll::Unadjusted => d,
        DateRoll::Following => {
            let mut x = d;
            while is_weekend(x) {
                x = x.succ_opt().unwrap();
            }
            x
        }
        DateRoll::ModifiedFollowing => {
            let f = roll_date(d, DateRoll::Following);
            if f.month() == d.month() {
                return f;
            }
            let mut x = d;
            while is_weekend(x) {
                x = x.pred_opt().unwrap();
            }
            x
        }
    }
}

/// Calendar month arithmetic, clamping to the end of shorter months.
pub fn add_months(d: NaiveDate, months: u32) -> NaiveDate {
    d.checked_add_months(Months::new(months)).expect("date overflow")
}

/// A co-terminal swap trade: the tenor structure plus economics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeSpec {
    pub valuation: NaiveDate,
    pub start: NaiveDate,
    pub notional: f64,
    pub kind: OptionKind,
    pub periods: usize,
    pub frequency_months: u32,
    #[serde(default)]
    pub roll: DateRoll,
    #[serde(default)]
    pub accrual: DayCount,
    /// Day count turning reset dates into model and option time.
    #[serde(default = "default_time_basis")]
    pub time_basis: DayCount,
}

fn default_time_basis() -> DayCount {
    DayCount::Act36525
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

impl TradeSpec {
    /// 10 x 6M payer, valued 2002-07-09.
    pub fn trade_i() -> Self {
        Self {
            valuation: ymd(2002, 7, 9),
            start: ymd(2002, 7, 12),
            notional: 10_000.0,
            kind: OptionKind::Payer,
            periods: 10,
            frequency_months: 6,
            roll: DateRoll::ModifiedFollowing,
            accrual: DayCount::Act360,
            time_basis: DayCount::Act36525,
        }
    }

    /// 20 x 12M payer, valued 2006-08-11.
    pub fn trade_ii() -> Self {
        Self {
            valuation: ymd(2006, 8, 11),
            start: ymd(2007, 2, 11),
            periods: 20,
            frequency_months: 12,
            ..Self::trade_i()
        }
    }

    /// 10 x 12M payer used by the hedge backtests, valued at the start of the trade period.
    pub fn hedge_trade() -> Self {
        Self {
            valuation: ymd(2004, 5, 28),
            start: ymd(2005, 8, 31),
            periods: 10,
            frequency_months: 12,
            ..Self::trade_i()
        }
    }

    pub fn with_valuation(&self, valuation: NaiveDate) -> Self {
        Self { valuation, ..self.clone() }
    }

    /// Reset and payment dates `T_1 .. T_{N+1}`.
    pub fn tenor_structure(&self) -> Result<TenorStructure, MarketError> {
        if self.periods == 0 || self.frequency_months == 0 {
            return Err(MarketError::Schedule("need at least one period of positive length".into()));
        }
        let dates: Vec<NaiveDate> = (0..=self.periods)
            .map(|k| roll_date(add_months(self.start, k as u32 * self.frequency_months), self.roll))
            .collect();
        TenorStructure::new(self.valuation, dates, self.frequency_months, self.accrual, self.time_basis)
    }
}

/// Dates `T_1 < ... < T_{N+1}` seen from a valuation date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenorStructure {
    pub valuation: NaiveDate,
    pub dates: Vec<NaiveDate>,
    pub frequency_months: u32,
    pub accrual: DayCount,
    pub time_basis: DayCount,
}

impl TenorStructure {
    pub fn new(
        valuation: NaiveDate,
        dates: Vec<NaiveDate>,
        frequency_months: u32,
        accrual: DayCount,
        time_basis: DayCount,
    ) -> Result<Self, MarketError> {
        if dates.len() < 2 {
            return Err(MarketError::Schedule("need at least two dates".into()));
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MarketError::NotIncreasing("tenor dates"));
        }
        if dates[0] <= valuation {
            return Err(MarketError::Schedule(format!("first reset {} is not after valuation {}", dates[0], valuation)));
        }
        Ok(Self { valuation, dates, frequency_months, accrual, time_basis })
    }

    /// Number of periods `N`.
    pub fn periods(&self) -> usize {
        self.dates.len() - 1
    }

    /// Day offsets of `T_1 .. T_{N+1}` from the valuation date.
    pub fn offsets(&self) -> Vec<i64> {
        self.dates.iter().map(|d| (*d - self.valuation).num_days()).collect()
    }

    /// `alpha_1 .. alpha_N`.
    pub fn accruals(&self) -> Vec<f64> {
        self.dates.windows(2).map(|w| self.accrual.year_fraction(w[0], w[1])).collect()
    }

    /// Model times of `T_1 .. T_{N+1}`.
    pub fn times(&self) -> Vec<f64> {
        self.offsets().iter().map(|&d| self.time_basis.year_fraction_days(d)).collect()
    }

    /// Nominal tenor in days of the swap starting at reset `n` (1-based), 30 days per month.
    pub fn nominal_tenor_days(&self, n: usize) -> f64 {
        ((self.periods() + 1 - n) as u32 * self.frequency_months * 30) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trade_i_offsets() {
        let ts = TradeSpec::trade_i().tenor_structure().unwrap();
        assert_eq!(ts.offsets(), vec![3, 188, 370, 552, 734, 918, 1099, 1283, 1464, 1648, 1829]);
    }

    #[test]
    fn trade_ii_rolls_off_sunday() {
        let ts = TradeSpec::trade_ii().tenor_structure().unwrap();
        assert_eq!(ts.dates[0], ymd(2007, 2, 12));
    }

    #[test]
    fn modified_following_stays_in_month() {
        assert_eq!(roll_date(ymd(2004, 10, 30), DateRoll::ModifiedFollowing), ymd(2004, 10, 29));
        assert_eq!(roll_date(ymd(2004, 10, 30), DateRoll::Following), ymd(2004, 11, 1));
    }

    #[test]
    fn act360_exact() {
        assert_eq!(DayCount::Act360.year_fraction_days(90), 0.25);
    }
}
