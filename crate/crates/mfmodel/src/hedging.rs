//! Daily hedging backtest of a Bermudan swaption: synthetic market scenarios, bump-and-revalue
//! sensitivities, and the value / liquidate / vega hedge / delta hedge / accrue loop.

use std::sync::Arc;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::analytic::{self, OptionKind, SwaptionSpec, UvddParams};
use crate::mapping::{adjust_sigma_to_atm, GridSpec, KernelSet, MappingModel, MarketStrip, MfLattice};
use crate::market::{
    bootstrap_curve, deposit_discount, AtmVolSurface, CurveInterpolation, Deposit, MarketError, ParSwap, TradeSpec,
    YieldCurve,
};
use crate::pipeline::{strip_from_curve, Setup};
use crate::pricing::{bermudan_value, BermudanTrade};
use crate::Error;

#[derive(Debug, ThisError)]
pub enum HedgingError {
    #[error("need at least {0} snapshots")]
    TooFewSnapshots(usize),
    #[error("risk cache has {risk} days for {days} snapshots")]
    RiskMismatch { risk: usize, days: usize },
    #[error("snapshot {0} has no deposits")]
    NoDeposit(NaiveDate),
    #[error("snapshot {date} carries {got} smiles for {want} expiries")]
    SmileCount { date: NaiveDate, got: usize, want: usize },
    #[error("could not draw a valid market on {0} after {1} attempts")]
    Resample(NaiveDate, usize),
    #[error("scenario spec: {0}")]
    Spec(String),
}

/// Smile shape per expiry; `sigma1` is always solved from the ATM quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmileShape {
    pub omega: f64,
    pub displacement: f64,
    pub lambda: f64,
}

/// Smile shapes observed on one (end-of-month) date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileNode {
    pub date: NaiveDate,
    pub shapes: Vec<SmileShape>,
}

/// One day's market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSnapshot {
    pub date: NaiveDate,
    /// Shortest first; the first deposit sets the bank account rate.
    pub deposits: Vec<Deposit>,
    pub swaps: Vec<ParSwap>,
    pub surface: AtmVolSurface,
    /// UVDD parameters per co-terminal expiry of the hedged trade.
    pub smiles: Vec<UvddParams<f64>>,
}

/// Identifies one curve input: deposits first, then swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveInput {
    Deposit(usize),
    Swap(usize),
}

impl MarketSnapshot {
    pub fn curve(&self) -> Result<YieldCurve, MarketError> {
        bootstrap_curve(self.date, &self.deposits, &self.swaps, CurveInterpolation::LinearZeroRate)
    }

    pub fn overnight_rate(&self) -> Result<f64, HedgingError> {
        self.deposits.first().map(|d| d.rate).ok_or(HedgingError::NoDeposit(self.date))
    }

    pub fn inputs(&self) -> Vec<CurveInput> {
        (0..self.deposits.len()).map(CurveInput::Deposit).chain((0..self.swaps.len()).map(CurveInput::Swap)).collect()
    }

    pub fn input_rate(&self, input: CurveInput) -> f64 {
        match input {
            CurveInput::Deposit(i) => self.deposits[i].rate,
            CurveInput::Swap(i) => self.swaps[i].rate,
        }
    }

    pub fn bumped(&self, input: CurveInput, bump: f64) -> Self {
        let mut s = self.clone();
        match input {
            CurveInput::Deposit(i) => s.deposits[i].rate += bump,
            CurveInput::Swap(i) => s.swaps[i].rate += bump,
        }
        s
    }
}

/// Smile shapes on `date`, linear in calendar days between the bracketing nodes and held flat
/// outside them.
pub fn interpolate_shapes(nodes: &[SmileNode], date: NaiveDate) -> Option<Vec<SmileShape>> {
    let first = nodes.first()?;
    if date <= first.date {
        return Some(first.shapes.clone());
    }
    for w in nodes.windows(2) {
        if date <= w[1].date {
            let span = (w[1].date - w[0].date).num_days() as f64;
            let t = (date - w[0].date).num_days() as f64 / span;
            let lerp = |a: f64, b: f64| a + t * (b - a);
            let shapes = w[0]
                .shapes
                .iter()
                .zip(&w[1].shapes)
                .map(|(a, b)| SmileShape {
                    omega: lerp(a.omega, b.omega),
                    displacement: lerp(a.displacement, b.displacement),
                    lambda: lerp(a.lambda, b.lambda),
                })
                .collect();
            return Some(shapes);
        }
    }
    Some(nodes.last()?.shapes.clone())
}

/// Daily UVDD parameters: shapes interpolated from the nodes, `sigma1` solved so the ATM price
/// matches Black at the day's ATM vol.
pub fn build_synthetic_smiles(
    nodes: &[SmileNode],
    date: NaiveDate,
    atm_specs: &[SwaptionSpec<f64>],
    atm_vols: &[f64],
) -> Result<Vec<UvddParams<f64>>, Error> {
    let shapes = interpolate_shapes(nodes, date).ok_or(HedgingError::Spec("no smile nodes".into()))?;
    if shapes.len() != atm_specs.len() {
        return Err(HedgingError::SmileCount { date, got: shapes.len(), want: atm_specs.len() }.into());
    }
    shapes
        .iter()
        .zip(atm_specs)
        .zip(atm_vols)
        .map(|((s, spec), &vol)| {
            let guess = UvddParams::from_omega(s.displacement, vol, s.omega, s.lambda);
            let sigma1 = adjust_sigma_to_atm(spec, &guess, vol)?;
            Ok(guess.with_sigma1(sigma1))
        })
        .collect()
}

/// The Bermudan being hedged: a co-terminal trade exercisable on every reset date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeDeal {
    pub trade: TradeSpec,
    pub strike: f64,
}

impl HedgeDeal {
    pub fn bermudan(&self) -> BermudanTrade<f64> {
        BermudanTrade {
            strike: self.strike,
            kind: self.trade.kind,
            notional: self.trade.notional,
            exercise: (1..=self.trade.periods).collect(),
        }
    }

    pub fn setup(&self, snapshot: &MarketSnapshot, curve: &YieldCurve) -> Result<Setup, Error> {
        Setup::new(&self.trade.with_valuation(snapshot.date), curve, &snapshot.surface)
    }
}

/// Smile Bermudan (UVDD mapping, vegas in `sigma1`) or non-smile (Black mapping, vegas in the
/// flat ATM vol).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BermudanMode {
    Smile,
    NonSmile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSizes {
    pub smile_vega: f64,
    pub flat_vega: f64,
    pub rate: f64,
}

impl Default for BumpSizes {
    fn default() -> Self {
        Self { smile_vega: 1e-4, flat_vega: 1e-3, rate: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskOptions {
    pub mode: BermudanMode,
    pub mean_reversion: f64,
    pub grid: GridSpec,
    pub bumps: BumpSizes,
}

impl Default for RiskOptions {
    fn default() -> Self {
        Self {
            mode: BermudanMode::Smile,
            mean_reversion: 0.0,
            grid: GridSpec { steps_per_dev: 10, deviations: 7, order: 3 },
            bumps: BumpSizes::default(),
        }
    }
}

/// Bermudan value with forward-difference vegas per expiry and deltas per curve input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityVector {
    pub value: f64,
    pub vegas: Vec<f64>,
    pub deltas: Vec<f64>,
}

/// Everything about one day that the ledger loop needs, computed once per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRisk {
    pub date: NaiveDate,
    pub curve: YieldCurve,
    pub setup: Setup,
    /// Strip under each bumped curve input, in [`MarketSnapshot::inputs`] order.
    pub bumped_strips: Vec<MarketStrip<f64>>,
    pub rate_bump: f64,
    pub sensitivities: SensitivityVector,
}

fn models_for(mode: BermudanMode, snapshot: &MarketSnapshot, setup: &Setup) -> Result<Vec<MappingModel<f64>>, Error> {
    let n = setup.periods();
    match mode {
        BermudanMode::NonSmile => Ok(setup.atm_vols.iter().map(|&vol| MappingModel::Black { vol }).collect()),
        BermudanMode::Smile => {
            if snapshot.smiles.len() != n {
                return Err(HedgingError::SmileCount { date: snapshot.date, got: snapshot.smiles.len(), want: n }.into());
            }
            Ok(snapshot.smiles.iter().map(|p| MappingModel::Uvdd(*p)).collect())
        }
    }
}

fn bump_model(model: &MappingModel<f64>, bumps: &BumpSizes) -> (MappingModel<f64>, f64) {
    match model {
        MappingModel::Uvdd(p) => (MappingModel::Uvdd(p.with_sigma1(p.sigma1 + bumps.smile_vega)), bumps.smile_vega),
        MappingModel::Black { vol } => (MappingModel::Black { vol: vol + bumps.flat_vega }, bumps.flat_vega),
        MappingModel::Displaced { displacement, vol } => {
            (MappingModel::Displaced { displacement: *displacement, vol: vol + bumps.flat_vega }, bumps.flat_vega)
        }
    }
}

/// Bump-and-revalue sensitivities of the deal on one snapshot; all revaluations share kernels.
pub fn bermudan_sensitivities(
    snapshot: &MarketSnapshot,
    deal: &HedgeDeal,
    opts: &RiskOptions,
) -> Result<DayRisk, Error> {
    let curve = snapshot.curve()?;
    let setup = deal.setup(snapshot, &curve)?;
    let n = setup.periods();
    let models = models_for(opts.mode, snapshot, &setup)?;
    let kernels = Arc::new(KernelSet::new(opts.mean_reversion, &setup.strip.times[..n], opts.grid)?);
    let trade = deal.bermudan();
    let value_of = |strip: &MarketStrip<f64>, models: &[MappingModel<f64>]| -> Result<f64, Error> {
        if trade.notional == 0.0 {
            return Ok(0.0);
        }
        let lat = MfLattice::build_with_kernels(strip, models, kernels.clone())?;
        Ok(bermudan_value(&lat, &trade)?.value)
    };
    let value = value_of(&setup.strip, &models)?;
    let mut vegas = Vec::with_capacity(n);
    for i in 0..n {
        let mut bumped = models.clone();
        let (m, h) = bump_model(&models[i], &opts.bumps);
        bumped[i] = m;
        vegas.push((value_of(&setup.strip, &bumped)? - value) / h);
    }
    let mut deltas = Vec::new();
    let mut bumped_strips = Vec::new();
    for input in snapshot.inputs() {
        let b = snapshot.bumped(input, opts.bumps.rate);
        let strip = strip_from_curve(&setup.tenor, &b.curve()?)?;
        deltas.push((value_of(&strip, &models)? - value) / opts.bumps.rate);
        bumped_strips.push(strip);
    }
    Ok(DayRisk { date: snapshot.date, curve, setup, bumped_strips, rate_bump: opts.bumps.rate, sensitivities: SensitivityVector { value, vegas, deltas } })
}

/// Sensitivities for every snapshot of a scenario.
pub fn compute_risk(scenario: &[MarketSnapshot], deal: &HedgeDeal, opts: &RiskOptions) -> Result<Vec<DayRisk>, Error> {
    scenario.iter().map(|s| bermudan_sensitivities(s, deal, opts)).collect()
}

/// Unit sensitivities of the hedge instruments to their own inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentRatios {
    /// `-dt / (1 + r dt)^2` per deposit.
    pub deposits: Vec<f64>,
    /// Fixed-leg PVBP per par swap.
    pub swaps: Vec<f64>,
    /// ATM European vega per co-terminal expiry (to `sigma1` or to the flat vol).
    pub european_vegas: Vec<f64>,
}

pub fn deposit_ratio(d: &Deposit) -> f64 {
    let dt = d.days as f64 / 360.0;
    -dt / (1.0 + d.rate * dt).powi(2)
}

pub fn hedge_instrument_ratios(
    snapshot: &MarketSnapshot,
    deal: &HedgeDeal,
    mode: BermudanMode,
) -> Result<InstrumentRatios, Error> {
    let curve = snapshot.curve()?;
    let setup = deal.setup(snapshot, &curve)?;
    let deposits = snapshot.deposits.iter().map(deposit_ratio).collect();
    let swaps = snapshot.swaps.iter().map(|s| s.pvbp(snapshot.date, &curve)).collect::<Result<Vec<_>, _>>()?;
    let european_vegas = (1..=setup.periods())
        .map(|n| {
            let spec = setup.strip.swaption(n, setup.strip.swap_rate(n), deal.trade.kind, 1.0);
            european_vega(mode, &spec, &snapshot.smiles.get(n - 1).copied(), setup.atm_vols[n - 1])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InstrumentRatios { deposits, swaps, european_vegas })
}

fn european_vega(
    mode: BermudanMode,
    spec: &SwaptionSpec<f64>,
    smile: &Option<UvddParams<f64>>,
    atm_vol: f64,
) -> Result<f64, Error> {
    let atm = (spec.strike - spec.forward).abs() <= 1e-12 * spec.forward.abs().max(1.0);
    Ok(match (mode, smile) {
        (BermudanMode::Smile, Some(p)) if atm => analytic::uvdd_vega_sigma1(spec, p)?,
        (BermudanMode::Smile, Some(p)) => {
            let h = BumpSizes::default().smile_vega;
            (analytic::uvdd_european(spec, &p.with_sigma1(p.sigma1 + h))?
                - analytic::uvdd_european(spec, &p.with_sigma1(p.sigma1 - h))?)
                / (2.0 * h)
        }
        (BermudanMode::Smile, None) => return Err(HedgingError::Spec("smile mode needs smile parameters".into()).into()),
        (BermudanMode::NonSmile, _) if atm => analytic::black_atm_vega(spec, atm_vol)?,
        (BermudanMode::NonSmile, _) => {
            let h = BumpSizes::default().smile_vega;
            (analytic::black_european(spec, atm_vol + h)? - analytic::black_european(spec, atm_vol - h)?) / (2.0 * h)
        }
    })
}

/// Valuation basis for hedge Europeans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liquidation {
    /// Smile quotes (the day's UVDD parameters).
    MarkToMarket,
    /// Flat Black at the day's ATM vol.
    MarkToModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Unhedged,
    Delta,
    DeltaVega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VegaRoll {
    /// New ATM Europeans every day.
    Daily,
    /// New ATM Europeans on the first day of each month; quantities still reset daily.
    Monthly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestOptions {
    pub strategy: Strategy,
    pub vega_roll: VegaRoll,
    pub liquidation: Liquidation,
}

impl BacktestOptions {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, vega_roll: VegaRoll::Daily, liquidation: Liquidation::MarkToMarket }
    }

    pub fn label(&self) -> String {
        let s = match self.strategy {
            Strategy::Unhedged => "unhedged",
            Strategy::Delta => "delta",
            Strategy::DeltaVega => "delta_vega",
        };
        let mut out = s.to_string();
        if self.strategy == Strategy::DeltaVega {
            if self.vega_roll == VegaRoll::Monthly {
                out += "_monthly";
            }
            if self.liquidation == Liquidation::MarkToModel {
                out += "_mtmodel";
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Instrument {
    /// Co-terminal European on expiry `n`.
    European { n: usize, strike: f64 },
    /// Par swap `index` traded on `anchor`; `first_df` fixes the first floating coupon.
    Swap { index: usize, anchor: NaiveDate, rate: f64, first_df: f64 },
    /// Zero bond paying 1 at `maturity`.
    Deposit { maturity: NaiveDate },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub instrument: Instrument,
    pub quantity: f64,
    pub basis: Liquidation,
}

/// One day of the ledger. `npv = bermudan + hedge_value + bank` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub date: NaiveDate,
    pub bermudan: f64,
    /// Yesterday's hedge portfolio at today's prices.
    pub hedge_value: f64,
    /// Bank account before liquidation.
    pub bank: f64,
    pub npv: f64,
    pub pnl: f64,
    /// Largest combined delta after rebalancing.
    pub residual_delta: f64,
    /// Largest combined vega after rebalancing.
    pub residual_vega: f64,
    /// Some hedge ratio was zero; its quantity was set to zero (the diagonal pseudo-inverse).
    pub singular_hedge: bool,
    /// Positions held overnight.
    pub positions: Vec<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnlStats {
    pub label: String,
    pub pnl_mean: f64,
    pub pnl_stdev: f64,
    pub terminal_npv: f64,
    pub npv_min: f64,
    pub npv_max: f64,
}

impl PnlStats {
    pub fn npv_range(&self) -> f64 {
        self.npv_max - self.npv_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub options: BacktestOptions,
    pub rows: Vec<LedgerRow>,
    pub stats: PnlStats,
}

fn stats(label: String, rows: &[LedgerRow]) -> PnlStats {
    let pnl: Vec<f64> = rows.iter().skip(1).map(|r| r.pnl).collect();
    let n = pnl.len().max(1) as f64;
    let mean = pnl.iter().sum::<f64>() / n;
    let var = pnl.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    PnlStats {
        label,
        pnl_mean: mean,
        pnl_stdev: var.sqrt(),
        terminal_npv: rows.last().map_or(0.0, |r| r.npv),
        npv_min: rows.iter().map(|r| r.npv).fold(f64::INFINITY, f64::min),
        npv_max: rows.iter().map(|r| r.npv).fold(f64::NEG_INFINITY, f64::max),
    }
}

struct DayContext<'a> {
    snapshot: &'a MarketSnapshot,
    risk: &'a DayRisk,
    kind: OptionKind,
}

impl DayContext<'_> {
    fn european_value(&self, strip: &MarketStrip<f64>, n: usize, strike: f64, basis: Liquidation) -> Result<f64, Error> {
        let spec = strip.swaption(n, strike, self.kind, 1.0);
        let atm_vol = self.risk.setup.atm_vols[n - 1];
        Ok(match (basis, self.snapshot.smiles.get(n - 1)) {
            (Liquidation::MarkToMarket, Some(p)) => analytic::uvdd_european(&spec, p)?,
            _ => analytic::black_european(&spec, atm_vol)?,
        })
    }

    fn value(&self, inst: &Instrument, basis: Liquidation) -> Result<f64, Error> {
        let curve = &self.risk.curve;
        let today = self.snapshot.date;
        let df = |d: NaiveDate| -> Result<f64, Error> {
            let days = (d - today).num_days();
            Ok(if days <= 0 { 1.0 } else { curve.discount_factor(days)? })
        };
        match *inst {
            Instrument::European { n, strike } => self.european_value(&self.risk.setup.strip, n, strike, basis),
            Instrument::Deposit { maturity } => df(maturity),
            Instrument::Swap { index, anchor, rate, first_df } => {
                let swap = &self.snapshot.swaps[index];
                let pays = swap.payment_days(anchor);
                let dates: Vec<NaiveDate> = pays.iter().map(|&d| anchor + chrono::Duration::days(d)).collect();
                let mut fixed = 0.0;
                let mut prev = anchor;
                for &d in &dates {
                    fixed += (d - prev).num_days() as f64 / 360.0 * df(d)?;
                    prev = d;
                }
                // first floating coupon was fixed at purchase: (1 + alpha L) = 1 / first_df
                let float = df(dates[0])? / first_df - df(*dates.last().unwrap())?;
                Ok(float - rate * fixed)
            }
        }
    }
}

fn is_month_start(prev: Option<NaiveDate>, d: NaiveDate) -> bool {
    prev.map_or(true, |p| p.month() != d.month() || p.year() != d.year())
}

/// Runs the daily loop over a scenario with precomputed risk.
pub fn run_backtest(
    scenario: &[MarketSnapshot],
    risk: &[DayRisk],
    deal: &HedgeDeal,
    mode: BermudanMode,
    options: BacktestOptions,
) -> Result<BacktestResult, Error> {
    if scenario.len() < 2 {
        return Err(HedgingError::TooFewSnapshots(2).into());
    }
    if risk.len() != scenario.len() {
        return Err(HedgingError::RiskMismatch { risk: risk.len(), days: scenario.len() }.into());
    }
    let basis = options.liquidation;
    let mut rows = Vec::with_capacity(scenario.len());
    let mut bank = -risk[0].sensitivities.value;
    let mut positions: Vec<Position> = Vec::new();
    let mut strikes: Vec<f64> = Vec::new();
    let mut prev_npv = 0.0;
    for (d, (snap, day)) in scenario.iter().zip(risk).enumerate() {
        let ctx = DayContext { snapshot: snap, risk: day, kind: deal.trade.kind };
        let bermudan = day.sensitivities.value;
        let mut hedge_value = 0.0;
        for p in &positions {
            hedge_value += p.quantity * ctx.value(&p.instrument, p.basis)?;
        }
        let bank_before = bank;
        let npv = bermudan + hedge_value + bank_before;
        let pnl = if d == 0 { 0.0 } else { npv - prev_npv };
        prev_npv = npv;
        bank += hedge_value;
        positions.clear();
        let mut singular = false;

        let n = day.setup.periods();
        let inputs = snap.inputs();
        let mut combined_delta = day.sensitivities.deltas.clone();
        let mut residual_vega = 0.0f64;
        if options.strategy == Strategy::DeltaVega {
            let prev_date = if d == 0 { None } else { Some(scenario[d - 1].date) };
            if options.vega_roll == VegaRoll::Daily || strikes.is_empty() || is_month_start(prev_date, snap.date) {
                strikes = (1..=n).map(|k| day.setup.strip.swap_rate(k)).collect();
            }
            for k in 1..=n {
                let strike = strikes[k - 1];
                let spec = day.setup.strip.swaption(k, strike, deal.trade.kind, 1.0);
                let vega = european_vega(mode, &spec, &snap.smiles.get(k - 1).copied(), day.setup.atm_vols[k - 1])?;
                let berm_vega = day.sensitivities.vegas[k - 1];
                let q = if vega.abs() > 0.0 && vega.is_finite() {
                    -berm_vega / vega
                } else {
                    singular |= berm_vega != 0.0;
                    0.0
                };
                residual_vega = residual_vega.max((berm_vega + q * vega).abs());
                let inst = Instrument::European { n: k, strike };
                let price = ctx.european_value(&day.setup.strip, k, strike, basis)?;
                bank -= q * price;
                for (j, strip) in day.bumped_strips.iter().enumerate() {
                    let up = ctx.european_value(strip, k, strike, basis)?;
                    combined_delta[j] += q * (up - price) / day.rate_bump;
                }
                positions.push(Position { instrument: inst, quantity: q, basis });
            }
        }
        let mut residual_delta = 0.0f64;
        if options.strategy != Strategy::Unhedged {
            let curve = &day.curve;
            for (j, input) in inputs.iter().enumerate() {
                let (inst, ratio, price) = match *input {
                    CurveInput::Deposit(i) => {
                        let dep = snap.deposits[i];
                        let maturity = snap.date + chrono::Duration::days(dep.days);
                        (Instrument::Deposit { maturity }, deposit_ratio(&dep), deposit_discount(dep.rate, dep.days))
                    }
                    CurveInput::Swap(i) => {
                        let swap = snap.swaps[i];
                        let first = swap.payment_days(snap.date)[0];
                        let inst =
                            Instrument::Swap { index: i, anchor: snap.date, rate: swap.rate, first_df: curve.discount_factor(first)? };
                        (inst, swap.pvbp(snap.date, curve)?, 0.0)
                    }
                };
                let q = if ratio != 0.0 && ratio.is_finite() {
                    -combined_delta[j] / ratio
                } else {
                    singular |= combined_delta[j] != 0.0;
                    0.0
                };
                residual_delta = residual_delta.max((combined_delta[j] + q * ratio).abs());
                bank -= q * price;
                positions.push(Position { instrument: inst, quantity: q, basis });
            }
        }
        rows.push(LedgerRow {
            date: snap.date,
            bermudan,
            hedge_value,
            bank: bank_before,
            npv,
            pnl,
            residual_delta,
            residual_vega,
            singular_hedge: singular,
            positions: positions.clone(),
        });
        if let Some(next) = scenario.get(d + 1) {
            let days = (next.date - snap.date).num_days() as f64;
            bank *= 1.0 + snap.overnight_rate()? * days / 360.0;
        }
    }
    let stats = stats(options.label(), &rows);
    Ok(BacktestResult { options, rows, stats })
}

/// Parameters of the synthetic market generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub start: NaiveDate,
    /// Business days, including the start.
    pub days: usize,
    pub deposits: Vec<Deposit>,
    pub swaps: Vec<ParSwap>,
    pub surface: AtmVolSurface,
    /// Daily standard deviation of the common log rate move.
    pub level_vol: f64,
    /// Daily standard deviation of the log slope move (short end down, long end up).
    pub slope_vol: f64,
    /// Daily drift of the common log rate.
    pub level_drift: f64,
    /// Daily standard deviation of the log ATM vol scaling.
    pub vol_of_vol: f64,
    /// Correlation of the vol scaling with the level move.
    pub rate_vol_correlation: f64,
    pub omega_range: (f64, f64),
    pub displacement_range: (f64, f64),
    pub lambda: f64,
    /// Rates below this are rejected and redrawn.
    pub min_rate: f64,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

impl ScenarioSpec {
    /// A EUR-like market on 2004-05-28, one year of business days.
    pub fn standard() -> Self {
        let deposits = [(1, 0.0200), (30, 0.0206), (91, 0.0209), (182, 0.0218), (365, 0.0240)]
            .iter()
            .map(|&(days, rate)| Deposit { days, rate })
            .collect();
        let swaps = [(2, 0.0275), (3, 0.0310), (4, 0.0340), (5, 0.0365), (6, 0.0385), (7, 0.0400), (8, 0.0412), (9, 0.0422), (10, 0.0430), (12, 0.0445), (15, 0.0460)]
            .iter()
            .map(|&(years, rate)| ParSwap { years, rate })
            .collect();
        let expiries: Vec<f64> = vec![30.0, 91.0, 182.0, 365.0, 730.0, 1095.0, 1461.0, 1826.0, 2557.0, 3652.0, 5479.0];
        let tenors: Vec<f64> = (1..=10).map(|y| 360.0 * y as f64).collect();
        let vols = tenors
            .iter()
            .map(|&t| expiries.iter().map(|&e| 0.13 + 0.09 * (-e / 730.0).exp() - 0.01 * t / 3600.0).collect())
            .collect();
        Self {
            start: ymd(2004, 5, 28),
            days: 250,
            deposits,
            swaps,
            surface: AtmVolSurface::new(expiries, tenors, vols).expect("standard surface"),
            level_vol: 0.012,
            slope_vol: 0.004,
            level_drift: 0.0,
            vol_of_vol: 0.004,
            rate_vol_correlation: -0.3,
            omega_range: (1.5, 3.0),
            displacement_range: (0.0, 0.10),
            lambda: 0.75,
            min_rate: 0.001,
        }
    }

    fn validate(&self) -> Result<(), HedgingError> {
        let ok = self.days >= 2
            && !self.deposits.is_empty()
            && self.level_vol >= 0.0
            && self.slope_vol >= 0.0
            && self.vol_of_vol >= 0.0
            && self.rate_vol_correlation.abs() <= 1.0
            && self.omega_range.0 > 0.0
            && self.omega_range.0 <= self.omega_range.1
            && self.displacement_range.0 >= 0.0
            && self.displacement_range.0 <= self.displacement_range.1
            && (0.0..=1.0).contains(&self.lambda);
        if ok {
            Ok(())
        } else {
            Err(HedgingError::Spec("vols must be non-negative, ranges ordered, at least 2 days".into()))
        }
    }
}

fn next_business_day(d: NaiveDate) -> NaiveDate {
    let mut n = d.succ_opt().unwrap();
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n = n.succ_opt().unwrap();
    }
    n
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        Uniform::new(lo, hi).expect("ordered range").sample(rng)
    } else {
        lo
    }
}

fn slope_weight(years: f64) -> f64 {
    years.min(10.0) / 10.0 - 0.5
}

/// Seeded correlated lognormal walks for deposits, par swaps and the ATM vol level; smile shapes are
/// drawn at month ends and interpolated, `sigma1` matched to the ATM quote every day.
pub fn generate_synthetic_scenario(seed: u64, spec: &ScenarioSpec, trade: &TradeSpec) -> Result<Vec<MarketSnapshot>, Error> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dates = vec![spec.start];
    while dates.len() < spec.days {
        dates.push(next_business_day(*dates.last().unwrap()));
    }
    // month-end nodes, plus both ends so every day is bracketed
    let mut node_dates = vec![dates[0]];
    for w in dates.windows(2) {
        if w[1].month() != w[0].month() {
            node_dates.push(w[0]);
        }
    }
    node_dates.push(*dates.last().unwrap());
    node_dates.dedup();
    let periods = trade.periods;
    let nodes: Vec<SmileNode> = node_dates
        .iter()
        .map(|&date| SmileNode {
            date,
            shapes: (0..periods)
                .map(|_| SmileShape {
                    omega: uniform(&mut rng, spec.omega_range),
                    displacement: uniform(&mut rng, spec.displacement_range),
                    lambda: spec.lambda,
                })
                .collect(),
        })
        .collect();

    let (mut level, mut slope, mut logvol) = (0.0f64, 0.0f64, 0.0f64);
    let rho = spec.rate_vol_correlation;
    let mut out = Vec::with_capacity(dates.len());
    for (i, &date) in dates.iter().enumerate() {
        let mut attempt = 0;
        let (snapshot, state) = loop {
            attempt += 1;
            if attempt > 1000 {
                return Err(HedgingError::Resample(date, 1000).into());
            }
            let (z1, z2, z3): (f64, f64, f64) = if i == 0 {
                (0.0, 0.0, 0.0)
            } else {
                (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            };
            let drift = if i == 0 { 0.0 } else { spec.level_drift };
            let l = level + drift + spec.level_vol * z1;
            let s = slope + spec.slope_vol * z2;
            let v = logvol + spec.vol_of_vol * (rho * z1 + (1.0 - rho * rho).sqrt() * z3);
            let shock = |rate: f64, years: f64| rate * (l + s * slope_weight(years)).exp();
            let deposits: Vec<Deposit> =
                spec.deposits.iter().map(|d| Deposit { days: d.days, rate: shock(d.rate, d.days as f64 / 365.0) }).collect();
            let swaps: Vec<ParSwap> =
                spec.swaps.iter().map(|p| ParSwap { years: p.years, rate: shock(p.rate, p.years as f64) }).collect();
            if deposits.iter().map(|d| d.rate).chain(swaps.iter().map(|p| p.rate)).any(|r| r < spec.min_rate) {
                continue;
            }
            let surface = spec.surface.scaled(v.exp());
            let mut snap = MarketSnapshot { date, deposits, swaps, surface, smiles: Vec::new() };
            let Ok(curve) = snap.curve() else { continue };
            let dfs: Vec<f64> = curve.points().map(|p| p.1).collect();
            if dfs.windows(2).any(|w| w[1] >= w[0]) {
                continue;
            }
            let setup = Setup::new(&trade.with_valuation(date), &curve, &snap.surface)?;
            let specs: Vec<SwaptionSpec<f64>> = (1..=setup.periods())
                .map(|n| setup.strip.swaption(n, setup.strip.swap_rate(n), trade.kind, 1.0))
                .collect();
            match build_synthetic_smiles(&nodes, date, &specs, &setup.atm_vols) {
                Ok(smiles) => snap.smiles = smiles,
                Err(_) => continue,
            }
            break (snap, (l, s, v));
        };
        (level, slope, logvol) = state;
        out.push(snapshot);
    }
    Ok(out)
}

/// `date,<label>_npv,<label>_pnl,...` for results over the same scenario.
pub fn ledger_csv(results: &[BacktestResult]) -> String {
    let mut s = String::from("date");
    for r in results {
        let l = r.options.label();
        s += &format!(",{l}_bermudan,{l}_npv,{l}_pnl");
    }
    s.push('\n');
    let days = results.first().map_or(0, |r| r.rows.len());
    for d in 0..days {
        s += &results[0].rows[d].date.to_string();
        for r in results {
            let row = &r.rows[d];
            s += &format!(",{},{},{}", row.bermudan, row.npv, row.pnl);
        }
        s.push('\n');
    }
    s
}

/// `date,dep_<days>...,swap_<years>y...,atm_<n>...,omega_<n>...,m_<n>...`.
pub fn scenario_csv(scenario: &[MarketSnapshot], risk: &[DayRisk]) -> String {
    let Some(first) = scenario.first() else { return String::new() };
    let mut s = String::from("date");
    for d in &first.deposits {
        s += &format!(",dep_{}d", d.days);
    }
    for p in &first.swaps {
        s += &format!(",swap_{}y", p.years);
    }
    let n = first.smiles.len();
    for k in 1..=n {
        s += &format!(",atm_{k}");
    }
    for k in 1..=n {
        s += &format!(",omega_{k}");
    }
    for k in 1..=n {
        s += &format!(",m_{k}");
    }
    s.push('\n');
    for (snap, day) in scenario.iter().zip(risk) {
        s += &snap.date.to_string();
        for d in &snap.deposits {
            s += &format!(",{}", d.rate);
        }
        for p in &snap.swaps {
            s += &format!(",{}", p.rate);
        }
        for v in &day.setup.atm_vols {
            s += &format!(",{v}");
        }
        for p in &snap.smiles {
            s += &format!(",{}", p.omega());
        }
        for p in &snap.smiles {
            s += &format!(",{}", p.displacement);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deposit_ratio_formula() {
        let r = deposit_ratio(&Deposit { days: 180, rate: 0.02 });
        assert!((r + 0.5 / 1.01f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn shape_interpolation() {
        let sh = |omega| vec![SmileShape { omega, displacement: 0.02, lambda: 0.75 }];
        let nodes = vec![SmileNode { date: ymd(2004, 5, 31), shapes: sh(2.0) }, SmileNode { date: ymd(2004, 6, 30), shapes: sh(3.0) }];
        assert_eq!(interpolate_shapes(&nodes, ymd(2004, 6, 15)).unwrap()[0].omega, 2.5);
        assert_eq!(interpolate_shapes(&nodes, ymd(2004, 5, 31)).unwrap()[0].omega, 2.0);
        assert_eq!(interpolate_shapes(&nodes, ymd(2004, 8, 1)).unwrap()[0].omega, 3.0);
    }

    #[test]
    fn business_days_skip_weekends() {
        assert_eq!(next_business_day(ymd(2004, 5, 28)), ymd(2004, 5, 31));
    }
}
