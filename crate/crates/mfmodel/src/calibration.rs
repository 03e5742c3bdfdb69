//! Per-expiry smile calibration (damped Gauss-Newton on transformed parameters) and the
//! historical mean-reversion estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError, OptionKind, SwaptionSpec, UvddParams};
use crate::driver::autocorrelation;
use crate::market::{AtmVolSurface, MarketError, SmileRatioCube};
use crate::pipeline::Setup;
use crate::roots::golden_min;

pub use crate::mapping::adjust_sigma_to_atm;

pub const DEFAULT_LAMBDA: f64 = 0.75;
pub const DEFAULT_BOUND: f64 = 0.10;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least 3 quotes, got {0}")]
    TooFewQuotes(usize),
    #[error("duplicate strike {0}")]
    DuplicateStrike(f64),
    #[error("quote at strike {strike} has price {price} outside ({lo}, {hi})")]
    BadQuote { strike: f64, price: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("no start point produced a finite objective")]
    NoFeasibleStart,
    #[error("need at least 2 aligned series")]
    TooFewSeries,
    #[error("series have different lengths")]
    Misaligned,
    #[error("need at least 60 observations, got {0}")]
    TooShort(usize),
    #[error("series {0} has non-positive values")]
    NonPositiveRate(usize),
    #[error("series {0} is constant, correlation undefined")]
    ConstantSeries(usize),
}

impl CalibrationError {
    pub fn is_data_error(&self) -> bool {
        !matches!(self, CalibrationError::Analytic(_) | CalibrationError::NoFeasibleStart)
    }
}

/// What the residuals measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `model price / market price - 1`.
    #[default]
    Price,
    /// `model implied vol / market implied vol - 1`.
    ImpliedVol,
}

/// Model families compared in a strip calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Flat Black vol at the ATM quote, nothing fitted.
    BlackAtm,
    /// One Black vol fitted across strikes.
    Lognormal,
    /// Displaced diffusion with `m >= 0`.
    Displaced,
    /// Two-component UVDD with `m >= 0`.
    Uvdd,
    /// Two-component UVDD with `0 < m < h_m`.
    UvddBounded,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] =
        [ModelFamily::BlackAtm, ModelFamily::Lognormal, ModelFamily::Displaced, ModelFamily::Uvdd, ModelFamily::UvddBounded];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::BlackAtm => "black_atm",
            ModelFamily::Lognormal => "lognormal",
            ModelFamily::Displaced => "displaced",
            ModelFamily::Uvdd => "uvdd",
            ModelFamily::UvddBounded => "uvdd_bounded",
        }
    }

    fn dimension(self) -> usize {
        match self {
            ModelFamily::BlackAtm => 0,
            ModelFamily::Lognormal => 1,
            ModelFamily::Displaced => 2,
            ModelFamily::Uvdd | ModelFamily::UvddBounded => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub strike: f64,
    pub kind: OptionKind,
    pub price: f64,
}

/// Quotes for one expiry plus the fitting conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProblem {
    pub expiry_day: f64,
    /// ATM swaption; quotes reuse everything but strike and kind.
    pub atm: SwaptionSpec<f64>,
    pub quotes: Vec<Quote>,
    pub objective: Objective,
    pub lambda: f64,
    /// Upper bound `h_m` on the displacement for the bounded family.
    pub bound: f64,
    market_vols: Vec<f64>,
}

impl CalibrationProblem {
    pub fn new(expiry_day: f64, atm: SwaptionSpec<f64>, quotes: Vec<Quote>) -> Result<Self, CalibrationError> {
        if quotes.len() < 3 {
            return Err(CalibrationError::TooFewQuotes(quotes.len()));
        }
        let atm = atm.with_strike(atm.forward);
        let mut strikes: Vec<f64> = quotes.iter().map(|q| q.strike).collect();
        strikes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if let Some(w) = strikes.windows(2).find(|w| w[0] == w[1]) {
            return Err(CalibrationError::DuplicateStrike(w[0]));
        }
        let mut market_vols = Vec::with_capacity(quotes.len());
        for q in &quotes {
            let spec = SwaptionSpec { strike: q.strike, kind: q.kind, ..atm };
            let scale = spec.pvbp * spec.notional;
            let hi = scale
                * match q.kind {
                    OptionKind::Payer => spec.forward,
                    OptionKind::Receiver => q.strike,
                };
            let lo = spec.intrinsic();
            if !(q.price > lo && q.price < hi && q.strike > 0.0) {
                return Err(CalibrationError::BadQuote { strike: q.strike, price: q.price, lo, hi });
            }
            market_vols.push(analytic::implied_black_vol(&spec, q.price)?.vol);
        }
        Ok(Self {
            expiry_day,
            atm,
            quotes,
            objective: Objective::Price,
            lambda: DEFAULT_LAMBDA,
            bound: DEFAULT_BOUND,
            market_vols,
        })
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    pub fn spec(&self, q: &Quote) -> SwaptionSpec<f64> {
        SwaptionSpec { strike: q.strike, kind: q.kind, ..self.atm }
    }

    /// Black implied vol of each quote.
    pub fn market_vols(&self) -> &[f64] {
        &self.market_vols
    }

    /// Market implied vol at the forward, linear in strike between quotes and flat outside.
    pub fn atm_vol(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.quotes.iter().map(|q| q.strike).zip(self.market_vols.iter().copied()).collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let f = self.atm.forward;
        if f <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            if f <= w[1].0 {
                let t = (f - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        pts[pts.len() - 1].1
    }
}

/// Quotes priced under known UVDD parameters at offsets (bp) from the forward; out-of-the-money
/// options on each side, non-positive strikes skipped.
pub fn synthetic_problem(
    expiry_day: f64,
    atm: &SwaptionSpec<f64>,
    params: &UvddParams<f64>,
    offsets_bp: &[f64],
) -> Result<CalibrationProblem, CalibrationError> {
    let mut quotes = Vec::new();
    for &o in offsets_bp {
        let strike = atm.forward + o * 1e-4;
        if strike <= 0.0 {
            continue;
        }
        let kind = if o < 0.0 { OptionKind::Receiver } else { OptionKind::Payer };
        let spec = SwaptionSpec { strike, kind, ..*atm };
        quotes.push(Quote { strike, kind, price: analytic::uvdd_european(&spec, params)? });
    }
    Ok(CalibrationProblem::new(expiry_day, *atm, quotes)?.with_lambda(params.lambda))
}

/// Nine offsets from -100 to +100 bp.
pub fn default_offsets() -> Vec<f64> {
    (-4..=4).map(|i| 25.0 * i as f64).collect()
}

/// One problem per co-terminal expiry, quotes from `ATM vol * ratio` Black prices.
pub fn strip_problems(
    setup: &Setup,
    surface: &AtmVolSurface,
    cube: &SmileRatioCube,
    offsets_bp: &[f64],
) -> Result<Vec<CalibrationProblem>, CalibrationError> {
    let days = setup.tenor.offsets();
    (1..=setup.periods())
        .map(|n| {
            let atm = setup.strip.swaption(n, setup.strip.swap_rate(n), OptionKind::Payer, setup.trade.notional);
            let (e, t) = (days[n - 1] as f64, setup.tenor.nominal_tenor_days(n));
            let mut quotes = Vec::new();
            for &o in offsets_bp {
                let strike = atm.forward + o * 1e-4;
                if strike <= 0.0 {
                    continue;
                }
                let kind = if o < 0.0 { OptionKind::Receiver } else { OptionKind::Payer };
                let vol = cube.smile_vol_clamped(surface, e, t, o)?;
                let spec = SwaptionSpec { strike, kind, ..atm };
                quotes.push(Quote { strike, kind, price: analytic::black_european(&spec, vol)? });
            }
            CalibrationProblem::new(e, atm, quotes)
        })
        .collect()
}

/// `x = ln sigma1`, `y = ln sigma2`, `z = ln(h_m / m - 1)`.
pub fn to_transformed(sigma1: f64, sigma2: f64, m: f64, bound: f64) -> [f64; 3] {
    [sigma1.ln(), sigma2.ln(), (bound / m - 1.0).ln()]
}

/// Inverse of [`to_transformed`]: `(sigma1, sigma2, m)` with `0 < m < h_m`.
pub fn from_transformed(v: [f64; 3], bound: f64) -> (f64, f64, f64) {
    (v[0].exp(), v[1].exp(), bound / (1.0 + v[2].exp()))
}

fn decode(family: ModelFamily, v: &[f64], problem: &CalibrationProblem, black_atm: f64) -> UvddParams<f64> {
    let lambda = problem.lambda;
    match family {
        ModelFamily::BlackAtm => UvddParams { displacement: 0.0, sigma1: black_atm, sigma2: black_atm, lambda },
        ModelFamily::Lognormal => UvddParams { displacement: 0.0, sigma1: v[0].exp(), sigma2: v[0].exp(), lambda },
        ModelFamily::Displaced => UvddParams { displacement: v[1].exp(), sigma1: v[0].exp(), sigma2: v[0].exp(), lambda },
        ModelFamily::Uvdd => UvddParams { displacement: v[2].exp(), sigma1: v[0].exp(), sigma2: v[1].exp(), lambda },
        ModelFamily::UvddBounded => {
            let (s1, s2, m) = from_transformed([v[0], v[1], v[2]], problem.bound);
            UvddParams { displacement: m, sigma1: s1, sigma2: s2, lambda }
        }
    }
}

fn encode(family: ModelFamily, p: &UvddParams<f64>, bound: f64) -> Vec<f64> {
    match family {
        ModelFamily::BlackAtm => vec![],
        ModelFamily::Lognormal => vec![p.sigma1.ln()],
        ModelFamily::Displaced => vec![p.sigma1.ln(), p.displacement.ln()],
        ModelFamily::Uvdd => vec![p.sigma1.ln(), p.sigma2.ln(), p.displacement.ln()],
        ModelFamily::UvddBounded => to_transformed(p.sigma1, p.sigma2, p.displacement, bound).to_vec(),
    }
}

/// Per-quote errors in the problem's objective.
pub fn residuals(problem: &CalibrationProblem, params: &UvddParams<f64>) -> Result<Vec<f64>, CalibrationError> {
    problem
        .quotes
        .iter()
        .zip(&problem.market_vols)
        .map(|(q, &iv)| {
            let spec = problem.spec(q);
            let model = analytic::uvdd_european(&spec, params)?;
            Ok(match problem.objective {
                Objective::Price => model / q.price - 1.0,
                Objective::ImpliedVol => analytic::implied_black_vol(&spec, model)?.vol / iv - 1.0,
            })
        })
        .collect()
}

/// Relative price errors regardless of the problem's objective.
pub fn price_errors(problem: &CalibrationProblem, params: &UvddParams<f64>) -> Result<Vec<f64>, CalibrationError> {
    residuals(&problem.clone().with_objective(Objective::Price), params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    pub step_tol: f64,
    pub rel_decrease_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, step_tol: 1e-10, rel_decrease_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// `sum r^2 / 2` at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A Jacobian column vanished at some iterate.
    pub degenerate: bool,
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn jacobian<F: FnMut(&[f64]) -> Option<Vec<f64>>>(f: &mut F, x: &[f64], m: usize) -> Option<DMatrix<f64>> {
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        let h = 1e-6 * x[c].abs().max(1.0);
        xp[c] = x[c] + h;
        let up = f(&xp)?;
        xp[c] = x[c] - h;
        let dn = f(&xp)?;
        xp[c] = x[c];
        for r in 0..m {
            j[(r, c)] = (up[r] - dn[r]) / (2.0 * h);
        }
    }
    Some(j)
}

/// Levenberg-Marquardt on a residual map that may refuse a point by returning `None`.
pub fn levenberg_marquardt<F: FnMut(&[f64]) -> Option<Vec<f64>>>(mut f: F, x0: &[f64], opts: LmOptions) -> Option<LmOutcome> {
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return None;
    }
    let m = r.len();
    let mut mu = -1.0;
    let mut degenerate = false;
    let out = |x: Vec<f64>, cost, iterations, converged, degenerate| LmOutcome { x, cost, iterations, converged, degenerate };
    let mut jac = jacobian(&mut f, &x, m)?;
    for it in 1..=opts.max_iter {
        if cost == 0.0 {
            return Some(out(x, cost, it - 1, true, degenerate));
        }
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * DVector::from_vec(r.clone());
        if (0..x.len()).any(|c| jac.column(c).amax() == 0.0) {
            degenerate = true;
        }
        if mu < 0.0 {
            mu = 1e-3 * a.diagonal().max().max(1e-300);
        }
        let mut damped = a.clone();
        for i in 0..x.len() {
            damped[(i, i)] += mu * a[(i, i)].max(1e-12);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                mu *= 10.0;
                continue;
            }
        };
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step.norm() < opts.step_tol * (xnorm + opts.step_tol) {
            return Some(out(x, cost, it, true, degenerate));
        }
        let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let trial = f(&xn).map(|rn| {
            let c = cost_of(&rn);
            (rn, c)
        });
        match trial {
            Some((rn, cn)) if cn.is_finite() && cn < cost => {
                let rel = (cost - cn) / cost;
                x = xn;
                r = rn;
                cost = cn;
                mu = (mu / 3.0).max(1e-300);
                if rel < opts.rel_decrease_tol {
                    return Some(out(x, cost, it, true, degenerate));
                }
                jac = jacobian(&mut f, &x, m)?;
            }
            _ => {
                mu *= 4.0;
                if mu > 1e300 {
                    return Some(out(x, cost, it, true, degenerate));
                }
            }
        }
    }
    Some(out(x, cost, opts.max_iter, false, degenerate))
}

/// Result of one expiry's fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpiryFit {
    pub expiry_day: f64,
    pub family: ModelFamily,
    pub params: UvddParams<f64>,
    /// Relative price error per quote.
    pub price_errors: Vec<f64>,
    pub avg_abs_err: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

fn start_points(family: ModelFamily, problem: &CalibrationProblem, initial: Option<UvddParams<f64>>) -> Vec<UvddParams<f64>> {
    let s = problem.atm_vol();
    let f = problem.atm.forward;
    let h = problem.bound;
    let lambda = problem.lambda;
    let mk = |m: f64, a: f64, b: f64| {
        let sd = s * f / (f + m);
        UvddParams { displacement: m, sigma1: a * sd, sigma2: b * sd, lambda }
    };
    let mut pts = vec![initial.unwrap_or(UvddParams { displacement: h / 2.0, sigma1: s, sigma2: s, lambda })];
    match family {
        ModelFamily::BlackAtm => return vec![],
        ModelFamily::Lognormal => pts = vec![mk(0.0, 1.0, 1.0)],
        ModelFamily::Displaced => pts.extend([mk(0.25 * h, 1.0, 1.0), mk(0.02 * h, 1.0, 1.0)]),
        ModelFamily::Uvdd | ModelFamily::UvddBounded => pts.extend([mk(0.25 * h, 0.7, 1.6), mk(0.8 * h, 0.9, 2.5)]),
    }
    if family == ModelFamily::Displaced {
        for p in &mut pts {
            p.sigma2 = p.sigma1;
        }
    }
    if family == ModelFamily::UvddBounded {
        for p in &mut pts {
            p.displacement = p.displacement.clamp(1e-4 * h, (1.0 - 1e-4) * h);
        }
    }
    pts
}

/// Fits one family to one expiry. Three start points (the given or default one plus two
/// perturbations); the lowest objective wins.
pub fn calibrate_expiry(
    problem: &CalibrationProblem,
    family: ModelFamily,
    initial: Option<UvddParams<f64>>,
) -> Result<ExpiryFit, CalibrationError> {
    let black_atm = problem.atm_vol();
    let finish = |params: UvddParams<f64>, iterations, converged, warning| -> Result<ExpiryFit, CalibrationError> {
        let price_errors = price_errors(problem, &params)?;
        let avg_abs_err = price_errors.iter().map(|e| e.abs()).sum::<f64>() / price_errors.len() as f64;
        Ok(ExpiryFit { expiry_day: problem.expiry_day, family, params, price_errors, avg_abs_err, iterations, converged, warning })
    };
    if family.dimension() == 0 {
        return finish(decode(family, &[], problem, black_atm), 0, true, None);
    }
    let mut best: Option<LmOutcome> = None;
    for start in start_points(family, problem, initial) {
        let x0 = encode(family, &start, problem.bound);
        if x0.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let obj = |v: &[f64]| -> Option<Vec<f64>> {
            let p = decode(family, v, problem, black_atm);
            residuals(problem, &p).ok().filter(|r| r.iter().all(|x| x.is_finite()))
        };
        if let Some(o) = levenberg_marquardt(obj, &x0, LmOptions::default()) {
            if best.as_ref().map_or(true, |b| o.cost < b.cost) {
                best = Some(o);
            }
        }
    }
    let best = best.ok_or(CalibrationError::NoFeasibleStart)?;
    let warning = match (best.converged, best.degenerate) {
        (false, _) => Some(format!("no convergence after {} iterations, best point kept", best.iterations)),
        (true, true) => Some("degenerate Jacobian encountered".to_string()),
        _ => None,
    };
    finish(decode(family, &best.x, problem, black_atm), best.iterations, best.converged, warning)
}

/// One entry per expiry; failures are kept as messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripEntry {
    pub expiry_day: f64,
    pub fit: Option<ExpiryFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripReport {
    pub family: ModelFamily,
    pub entries: Vec<StripEntry>,
}

impl StripReport {
    pub fn failed(&self) -> bool {
        self.entries.iter().any(|e| e.fit.is_none())
    }

    /// Mean over expiries of the per-expiry average absolute error; `None` if any expiry failed.
    pub fn avg_abs_err(&self) -> Option<f64> {
        if self.failed() || self.entries.is_empty() {
            return None;
        }
        let sum: f64 = self.entries.iter().filter_map(|e| e.fit.as_ref()).map(|f| f.avg_abs_err).sum();
        Some(sum / self.entries.len() as f64)
    }

    /// `expiry_day,sigma1,sigma2,omega,m,lambda,avg_abs_err`; failed rows carry empty fields.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("expiry_day,sigma1,sigma2,omega,m,lambda,avg_abs_err\n");
        for e in &self.entries {
            match &e.fit {
                Some(f) => {
                    let p = &f.params;
                    s += &format!(
                        "{},{},{},{},{},{},{}\n",
                        e.expiry_day,
                        p.sigma1,
                        p.sigma2,
                        p.omega(),
                        p.displacement,
                        p.lambda,
                        f.avg_abs_err
                    );
                }
                None => s += &format!("{},,,,,,\n", e.expiry_day),
            }
        }
        s
    }
}

/// Independent per-expiry calibrations of one family.
pub fn calibrate_strip(problems: &[CalibrationProblem], family: ModelFamily) -> StripReport {
    let entries = problems
        .iter()
        .map(|p| match calibrate_expiry(p, family, None) {
            Ok(fit) => StripEntry { expiry_day: p.expiry_day, fit: Some(fit), error: None },
            Err(e) => StripEntry { expiry_day: p.expiry_day, fit: None, error: Some(e.to_string()) },
        })
        .collect();
    StripReport { family, entries }
}

/// `P(S_T <= 0)` under UVDD parameters.
pub fn negative_rate_probability(params: &UvddParams<f64>, forward: f64, t: f64) -> Result<f64, CalibrationError> {
    Ok(analytic::uvdd_cdf(params, forward, t, 0.0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub first: usize,
    pub second: usize,
    /// Daily log-return correlation.
    pub instantaneous: f64,
    /// `instantaneous * sqrt(T_first / T_second)`.
    pub target: f64,
    /// Driver autocorrelation at the fitted mean reversion.
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReversionEstimate {
    pub mean_reversion: f64,
    pub pairs: Vec<PairCorrelation>,
    pub rms_error: f64,
}

fn log_returns(s: &[f64]) -> Vec<f64> {
    s.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Least-squares fit of the driver autocorrelation to `rho_hat sqrt(T_n / T_k)` over all pairs.
/// `series[i]` holds daily observations of the co-terminal swap rate expiring at `expiries[i]`.
pub fn estimate_mean_reversion(series: &[Vec<f64>], expiries: &[f64]) -> Result<MeanReversionEstimate, CalibrationError> {
    if series.len() < 2 || series.len() != expiries.len() {
        return Err(CalibrationError::TooFewSeries);
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(CalibrationError::Misaligned);
    }
    if len < 60 {
        return Err(CalibrationError::TooShort(len));
    }
    let mut rets = Vec::with_capacity(series.len());
    for (i, s) in series.iter().enumerate() {
        if s.iter().any(|v| !(*v > 0.0)) {
            return Err(CalibrationError::NonPositiveRate(i));
        }
        let r = log_returns(s);
        let m = r.iter().sum::<f64>() / r.len() as f64;
        if r.iter().all(|v| (v - m).abs() == 0.0) {
            return Err(CalibrationError::ConstantSeries(i));
        }
        rets.push(r);
    }
    let mut pairs = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let (a, b) = if expiries[i] <= expiries[j] { (i, j) } else { (j, i) };
            let rho = correlation(&rets[a], &rets[b]).clamp(-1.0, 1.0);
            pairs.push(PairCorrelation {
                first: a,
                second: b,
                instantaneous: rho,
                target: rho * (expiries[a] / expiries[b]).sqrt(),
                model: 0.0,
            });
        }
    }
    let sse = |a: f64, pairs: &[PairCorrelation]| -> f64 {
        pairs
            .iter()
            .map(|p| {
                let m = autocorrelation(a, expiries[p.first], expiries[p.second]).unwrap_or(f64::NAN);
                (m - p.target).powi(2)
            })
            .sum()
    };
    let (a, err) = golden_min(|a| sse(a, &pairs), -1.0, 2.0, 1e-9);
    for p in &mut pairs {
        p.model = autocorrelation(a, expiries[p.first], expiries[p.second]).unwrap_or(f64::NAN);
    }
    let rms_error = (err / pairs.len() as f64).sqrt();
    Ok(MeanReversionEstimate { mean_reversion: a, pairs, rms_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atm() -> SwaptionSpec<f64> {
        SwaptionSpec { expiry: 5.0, forward: 0.0475, pvbp: 4.0, strike: 0.0475, kind: OptionKind::Payer, notional: 1.0 }
    }

    #[test]
    fn transform_round_trip() {
        let v = to_transformed(0.02, 0.09, 0.0852, 0.1);
        let (a, b, m) = from_transformed(v, 0.1);
        assert!((a - 0.02).abs() < 1e-16 && (b - 0.09).abs() < 1e-16 && (m - 0.0852).abs() < 1e-16);
    }

    #[test]
    fn bad_quote_sets_rejected() {
        let q = vec![Quote { strike: 0.04, kind: OptionKind::Payer, price: 0.01 }; 3];
        assert!(matches!(CalibrationProblem::new(1.0, atm(), q), Err(CalibrationError::DuplicateStrike(_))));
        let q = vec![Quote { strike: 0.04, kind: OptionKind::Payer, price: 1.0 }];
        assert!(matches!(CalibrationProblem::new(1.0, atm(), q), Err(CalibrationError::TooFewQuotes(1))));
    }

    #[test]
    fn generating_params_have_zero_residuals() {
        let p = UvddParams { displacement: 0.0852, sigma1: 0.0245, sigma2: 0.0879, lambda: 0.75 };
        let prob = synthetic_problem(1826.0, &atm(), &p, &default_offsets()).unwrap();
        assert!(residuals(&prob, &p).unwrap().iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn lm_solves_linear_least_squares() {
        // y = 2 + 3 t exactly
        let ts = [0.0, 1.0, 2.0, 3.0];
        let f = |x: &[f64]| Some(ts.iter().map(|t| x[0] + x[1] * t - (2.0 + 3.0 * t)).collect());
        let o = levenberg_marquardt(f, &[0.0, 0.0], LmOptions::default()).unwrap();
        assert!((o.x[0] - 2.0).abs() < 1e-8 && (o.x[1] - 3.0).abs() < 1e-8);
        assert!(o.converged);
    }
}
