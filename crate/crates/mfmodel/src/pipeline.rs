//! Glue from market data and a trade to a mapped lattice.

use serde::{Deserialize, Serialize};

use crate::analytic::OptionKind;
use crate::mapping::{GridSpec, MappingCase, MappingModel, MarketStrip, MfLattice};
use crate::market::{AtmVolSurface, MarketError, TenorStructure, TradeSpec, YieldCurve};
use crate::Error;

/// Everything needed to map one co-terminal deal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub trade: TradeSpec,
    pub tenor: TenorStructure,
    pub strip: MarketStrip<f64>,
    /// ATM Black vol per reset date.
    pub atm_vols: Vec<f64>,
}

/// Today's discount factors and accruals of a tenor structure.
pub fn strip_from_curve(tenor: &TenorStructure, curve: &YieldCurve) -> Result<MarketStrip<f64>, MarketError> {
    let days = tenor.offsets();
    let discounts = days.iter().map(|&d| curve.discount_factor(d)).collect::<Result<Vec<_>, _>>()?;
    MarketStrip::new(days.iter().map(|&d| d as f64).collect(), tenor.times(), tenor.accruals(), discounts)
        .map_err(|e| MarketError::Schedule(e.to_string()))
}

/// ATM vols looked up at the actual expiry day and the nominal tenor, clamped to the surface.
pub fn atm_vols(tenor: &TenorStructure, surface: &AtmVolSurface) -> Vec<f64> {
    let days = tenor.offsets();
    (1..=tenor.periods())
        .map(|n| surface.atm_vol_clamped(days[n - 1] as f64, tenor.nominal_tenor_days(n)))
        .collect()
}

impl Setup {
    pub fn new(trade: &TradeSpec, curve: &YieldCurve, surface: &AtmVolSurface) -> Result<Self, Error> {
        let tenor = trade.tenor_structure()?;
        let strip = strip_from_curve(&tenor, curve)?;
        let atm_vols = atm_vols(&tenor, surface);
        Ok(Self { trade: trade.clone(), tenor, strip, atm_vols })
    }

    pub fn periods(&self) -> usize {
        self.strip.periods()
    }

    pub fn models(&self, case: &MappingCase) -> Result<Vec<MappingModel<f64>>, Error> {
        Ok(case.resolve_strip(&self.strip, &self.atm_vols)?)
    }

    pub fn lattice(&self, case: &MappingCase, mean_reversion: f64, grid: GridSpec) -> Result<MfLattice<f64>, Error> {
        let models = self.models(case)?;
        Ok(MfLattice::build(&self.strip, &models, mean_reversion, grid)?)
    }

    /// Analytic price of the co-terminal European at `T_n` under the case's model.
    pub fn analytic_european(&self, case: &MappingCase, n: usize, strike: f64, kind: OptionKind) -> Result<f64, Error> {
        let models = self.models(case)?;
        let spec = self.strip.swaption(n, strike, kind, self.trade.notional);
        Ok(models[n - 1].european(&spec)?)
    }
}
