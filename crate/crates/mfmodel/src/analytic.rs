//! Closed-form European and digital swaption prices under Black, displaced diffusion and
//! the uncertain-volatility displaced diffusion (UVDD) mixture.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal::{norm_cdf, norm_pdf};
use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("displaced {what} is not positive ({value})")]
    ShiftedNonPositive { what: &'static str, value: f64 },
    #[error("ATM formula used off the money: strike {strike} vs forward {forward}")]
    NotAtm { strike: f64, forward: f64 },
    #[error("invalid mixture: {0}")]
    BadMixture(String),
    #[error("price {price} outside no-arbitrage bounds [{lower}, {upper})")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },
    #[error("implied volatility not found in [{lo}, {hi}]")]
    NoSolution { lo: f64, hi: f64 },
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Payer,
    Receiver,
}

impl OptionKind {
    /// +1 for payers, -1 for receivers.
    pub fn phi<T: Real>(self) -> T {
        match self {
            OptionKind::Payer => T::one(),
            OptionKind::Receiver => -T::one(),
        }
    }
}

/// A European swaption on a forward swap rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SwaptionSpec<T> {
    /// Time to expiry in years.
    pub expiry: T,
    pub forward: T,
    pub pvbp: T,
    pub strike: T,
    pub kind: OptionKind,
    pub notional: T,
}

impl<T: Real> SwaptionSpec<T> {
    fn check(&self) -> Result<(), AnalyticError> {
        if !(self.expiry >= T::zero()) {
            return Err(AnalyticError::NonPositive { what: "expiry", value: f64_of(self.expiry) });
        }
        if !(self.pvbp > T::zero()) {
            return Err(AnalyticError::NonPositive { what: "pvbp", value: f64_of(self.pvbp) });
        }
        if !(self.notional >= T::zero()) {
            return Err(AnalyticError::NonPositive { what: "notional", value: f64_of(self.notional) });
        }
        Ok(())
    }

    pub fn with_strike(mut self, strike: T) -> Self {
        self.strike = strike;
        self
    }

    /// Intrinsic value `P * max(phi (S - K), 0) * notional`.
    pub fn intrinsic(&self) -> T {
        let phi: T = self.kind.phi();
        self.pvbp * (phi * (self.forward - self.strike)).max(T::zero()) * self.notional
    }
}

/// Undiscounted lognormal call/put value per unit annuity.
fn black_core<T: Real>(kind: OptionKind, f: T, k: T, vol: T, t: T) -> T {
    let s = vol * t.sqrt();
    let phi: T = kind.phi();
    if !(s > T::zero()) {
        return (phi * (f - k)).max(T::zero());
    }
    let half: T = lit(0.5);
    let d1 = ((f / k).ln() + half * s * s) / s;
    let d2 = d1 - s;
    phi * (f * norm_cdf(phi * d1) - k * norm_cdf(phi * d2))
}

/// Probability weight of the digital per unit annuity.
fn digital_core<T: Real>(kind: OptionKind, f: T, k: T, vol: T, t: T) -> T {
    let s = vol * t.sqrt();
    let half: T = lit(0.5);
    if !(s > T::zero()) {
        let itm = match kind {
            OptionKind::Payer => f > k,
            OptionKind::Receiver => f < k,
        };
        return if f == k { half } else if itm { T::one() } else { T::zero() };
    }
    let d2 = ((f / k).ln() - half * s * s) / s;
    match kind {
        OptionKind::Payer => norm_cdf(d2),
        OptionKind::Receiver => norm_cdf(-d2),
    }
}

fn shifted<T: Real>(spec: &SwaptionSpec<T>, m: T) -> Result<(T, T), AnalyticError> {
    let f = spec.forward + m;
    let k = spec.strike + m;
    if !(f > T::zero()) {
        return Err(AnalyticError::ShiftedNonPositive { what: "forward", value: f64_of(f) });
    }
    if !(k > T::zero()) {
        return Err(AnalyticError::ShiftedNonPositive { what: "strike", value: f64_of(k) });
    }
    Ok((f, k))
}

fn check_vol<T: Real>(vol: T) -> Result<(), AnalyticError> {
    if !(vol > T::zero()) || !vol.is_finite() {
        return Err(AnalyticError::NonPositive { what: "volatility", value: f64_of(vol) });
    }
    Ok(())
}

pub fn black_european<T: Real>(spec: &SwaptionSpec<T>, vol: T) -> Result<T, AnalyticError> {
    dd_european(spec, T::zero(), vol)
}

pub fn black_digital<T: Real>(spec: &SwaptionSpec<T>, vol: T) -> Result<T, AnalyticError> {
    dd_digital(spec, T::zero(), vol)
}

pub fn dd_european<T: Real>(spec: &SwaptionSpec<T>, m: T, vol: T) -> Result<T, AnalyticError> {
    spec.check()?;
    check_vol(vol)?;
    let (f, k) = shifted(spec, m)?;
    Ok(spec.pvbp * spec.notional * black_core(spec.kind, f, k, vol, spec.expiry))
}

pub fn dd_digital<T: Real>(spec: &SwaptionSpec<T>, m: T, vol: T) -> Result<T, AnalyticError> {
    spec.check()?;
    check_vol(vol)?;
    let (f, k) = shifted(spec, m)?;
    Ok(spec.pvbp * spec.notional * digital_core(spec.kind, f, k, vol, spec.expiry))
}

/// Black vega `dV/dsigma` at any strike.
pub fn black_vega<T: Real>(spec: &SwaptionSpec<T>, vol: T) -> Result<T, AnalyticError> {
    spec.check()?;
    check_vol(vol)?;
    let (f, k) = shifted(spec, T::zero())?;
    let st = spec.expiry.sqrt();
    let s = vol * st;
    if !(s > T::zero()) {
        return Ok(T::zero());
    }
    let half: T = lit(0.5);
    let d1 = ((f / k).ln() + half * s * s) / s;
    Ok(spec.pvbp * spec.notional * f * norm_pdf(d1) * st)
}

/// One lognormal component of a displaced mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MixtureComponent<T> {
    pub weight: T,
    pub vol: T,
}

/// Terminal law `S + m` distributed as a weighted mixture of lognormals sharing the forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mixture<T> {
    pub displacement: T,
    pub components: Vec<MixtureComponent<T>>,
}

impl<T: Real> Mixture<T> {
    pub fn new(displacement: T, components: Vec<MixtureComponent<T>>) -> Result<Self, AnalyticError> {
        let m = Self { displacement, components };
        m.validate()?;
        Ok(m)
    }

    /// Single-component displaced diffusion.
    pub fn displaced(displacement: T, vol: T) -> Result<Self, AnalyticError> {
        Self::new(displacement, vec![MixtureComponent { weight: T::one(), vol }])
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if self.components.is_empty() {
            return Err(AnalyticError::BadMixture("no components".into()));
        }
        let mut total = T::zero();
        for c in &self.components {
            if !(c.weight >= T::zero() && c.weight <= T::one()) {
                return Err(AnalyticError::BadMixture(format!("weight {} outside [0, 1]", c.weight)));
            }
            check_vol(c.vol)?;
            total = total + c.weight;
        }
        if (total - T::one()).abs() > lit(1e-9) {
            return Err(AnalyticError::BadMixture(format!("weights sum to {total}")));
        }
        if !self.displacement.is_finite() {
            return Err(AnalyticError::BadMixture("non-finite displacement".into()));
        }
        Ok(())
    }

    /// `P(S_T <= y)` for a forward `s0` and expiry `t`.
    pub fn cdf(&self, s0: T, t: T, y: T) -> T {
        let x = y + self.displacement;
        if !(x > T::zero()) {
            return T::zero();
        }
        let f = s0 + self.displacement;
        let half: T = lit(0.5);
        self.components.iter().fold(T::zero(), |acc, c| {
            let s = c.vol * t.sqrt();
            let p = if s > T::zero() {
                norm_cdf(((x / f).ln() + half * s * s) / s)
            } else if x >= f {
                T::one()
            } else {
                T::zero()
            };
            acc + c.weight * p
        })
    }

    /// Terminal density of `S_T` at `y`.
    pub fn density(&self, s0: T, t: T, y: T) -> T {
        let x = y + self.displacement;
        if !(x > T::zero()) {
            return T::zero();
        }
        let f = s0 + self.displacement;
        let half: T = lit(0.5);
        self.components.iter().fold(T::zero(), |acc, c| {
            let s = c.vol * t.sqrt();
            let z = ((x / f).ln() + half * s * s) / s;
            acc + c.weight * norm_pdf(z) / (x * s)
        })
    }
}

/// Two-component UVDD parameters with a shared displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct UvddParams<T> {
    pub displacement: T,
    pub sigma1: T,
    pub sigma2: T,
    pub lambda: T,
}

impl<T: Real> UvddParams<T> {
    pub fn from_omega(displacement: T, sigma1: T, omega: T, lambda: T) -> Self {
        Self { displacement, sigma1, sigma2: omega * sigma1, lambda }
    }

    pub fn omega(&self) -> T {
        self.sigma2 / self.sigma1
    }

    pub fn with_sigma1(&self, sigma1: T) -> Self {
        Self::from_omega(self.displacement, sigma1, self.omega(), self.lambda)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        check_vol(self.sigma1)?;
        check_vol(self.sigma2)?;
        if !(self.lambda >= T::zero() && self.lambda <= T::one()) {
            return Err(AnalyticError::BadMixture(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        Ok(())
    }

    pub fn mixture(&self) -> Result<Mixture<T>, AnalyticError> {
        self.validate()?;
        Mixture::new(
            self.displacement,
            vec![
                MixtureComponent { weight: self.lambda, vol: self.sigma1 },
                MixtureComponent { weight: T::one() - self.lambda, vol: self.sigma2 },
            ],
        )
    }
}

pub fn mixture_european<T: Real>(spec: &SwaptionSpec<T>, mix: &Mixture<T>) -> Result<T, AnalyticError> {
    spec.check()?;
    mix.validate()?;
    let (f, k) = shifted(spec, mix.displacement)?;
    let v = mix
        .components
        .iter()
        .fold(T::zero(), |acc, c| acc + c.weight * black_core(spec.kind, f, k, c.vol, spec.expiry));
    Ok(spec.pvbp * spec.notional * v)
}

pub fn mixture_digital<T: Real>(spec: &SwaptionSpec<T>, mix: &Mixture<T>) -> Result<T, AnalyticError> {
    spec.check()?;
    mix.validate()?;
    let (f, k) = shifted(spec, mix.displacement)?;
    let v = mix
        .components
        .iter()
        .fold(T::zero(), |acc, c| acc + c.weight * digital_core(spec.kind, f, k, c.vol, spec.expiry));
    Ok(spec.pvbp * spec.notional * v)
}

pub fn uvdd_european<T: Real>(spec: &SwaptionSpec<T>, params: &UvddParams<T>) -> Result<T, AnalyticError> {
    mixture_european(spec, &params.mixture()?)
}

pub fn uvdd_digital<T: Real>(spec: &SwaptionSpec<T>, params: &UvddParams<T>) -> Result<T, AnalyticError> {
    mixture_digital(spec, &params.mixture()?)
}

fn check_atm<T: Real>(spec: &SwaptionSpec<T>) -> Result<(), AnalyticError> {
    let tol: T = lit::<T>(1e-12).max(T::epsilon() * lit(16.0));
    if (spec.strike - spec.forward).abs() > tol * spec.forward.abs().max(T::one()) {
        return Err(AnalyticError::NotAtm { strike: f64_of(spec.strike), forward: f64_of(spec.forward) });
    }
    Ok(())
}

/// ATM Black vega `P S phi(sigma sqrt(T) / 2) sqrt(T)` on the notional.
pub fn black_atm_vega<T: Real>(spec: &SwaptionSpec<T>, vol: T) -> Result<T, AnalyticError> {
    spec.check()?;
    check_vol(vol)?;
    check_atm(spec)?;
    let half: T = lit(0.5);
    let st = spec.expiry.sqrt();
    Ok(spec.pvbp * spec.forward * norm_pdf(half * vol * st) * st * spec.notional)
}

/// ATM UVDD vega with respect to `sigma1`, `omega` and `m` held fixed.
pub fn uvdd_vega_sigma1<T: Real>(spec: &SwaptionSpec<T>, params: &UvddParams<T>) -> Result<T, AnalyticError> {
    spec.check()?;
    params.validate()?;
    check_atm(spec)?;
    let half: T = lit(0.5);
    let st = spec.expiry.sqrt();
    let d1 = half * params.sigma1 * st;
    let d2 = half * params.sigma2 * st;
    let lam = params.lambda;
    let w = params.omega();
    Ok(spec.pvbp
        * (spec.forward + params.displacement)
        * (lam * norm_pdf(d1) + (T::one() - lam) * norm_pdf(d2) * w)
        * st
        * spec.notional)
}

pub fn uvdd_terminal_density<T: Real>(params: &UvddParams<T>, s0: T, t: T, y: T) -> Result<T, AnalyticError> {
    Ok(params.mixture()?.density(s0, t, y))
}

/// `P(S_T <= y)` under the UVDD law.
pub fn uvdd_cdf<T: Real>(params: &UvddParams<T>, s0: T, t: T, y: T) -> Result<T, AnalyticError> {
    Ok(params.mixture()?.cdf(s0, t, y))
}

/// Result of a Black implied-volatility inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ImpliedVol<T> {
    pub vol: T,
    /// Set when the price sits at intrinsic value and the volatility collapsed to zero.
    pub lower_bound_hit: bool,
}

pub const IMPLIED_VOL_MIN: f64 = 1e-6;
pub const IMPLIED_VOL_MAX: f64 = 5.0;

/// Inverts the Black formula by Newton steps safeguarded with bisection on `[1e-6, 5]`.
pub fn implied_black_vol<T: Real>(spec: &SwaptionSpec<T>, price: T) -> Result<ImpliedVol<T>, AnalyticError> {
    spec.check()?;
    shifted(spec, T::zero())?;
    let scale = spec.pvbp * spec.notional;
    let tol = scale * lit::<T>(1e-10).max(T::epsilon() * lit(64.0));
    let intrinsic = spec.intrinsic();
    let upper = scale
        * match spec.kind {
            OptionKind::Payer => spec.forward,
            OptionKind::Receiver => spec.strike,
        };
    if !(price >= intrinsic - tol) || !(price < upper) {
        return Err(AnalyticError::PriceOutOfBounds { price: f64_of(price), lower: f64_of(intrinsic), upper: f64_of(upper) });
    }
    let (mut lo, mut hi): (T, T) = (lit(IMPLIED_VOL_MIN), lit(IMPLIED_VOL_MAX));
    let f = |v: T| black_european(spec, v).map(|p| p - price);
    let flo = f(lo)?;
    if flo >= -tol {
        return Ok(ImpliedVol { vol: T::zero(), lower_bound_hit: true });
    }
    let fhi = f(hi)?;
    if fhi < T::zero() {
        return Err(AnalyticError::NoSolution { lo: IMPLIED_VOL_MIN, hi: IMPLIED_VOL_MAX });
    }
    // start from the ATM approximation, clamped into the bracket
    let t = spec.expiry.max(lit(1e-12));
    let mut v = (price / (scale * lit::<T>(0.4) * spec.forward.max(spec.strike) * t.sqrt())).max(lo).min(hi);
    if !(v > lo && v < hi) {
        v = lit::<T>(0.5) * (lo + hi);
    }
    for _ in 0..300 {
        let fv = f(v)?;
        if fv.abs() <= tol {
            return Ok(ImpliedVol { vol: v, lower_bound_hit: false });
        }
        if fv < T::zero() {
            lo = v;
        } else {
            hi = v;
        }
        let vega = black_vega(spec, v)?;
        let step = if vega > T::zero() { v - fv / vega } else { lo - T::one() };
        v = if step > lo && step < hi { step } else { lit::<T>(0.5) * (lo + hi) };
        if hi - lo <= T::epsilon() * hi {
            return Ok(ImpliedVol { vol: v, lower_bound_hit: false });
        }
    }
    Ok(ImpliedVol { vol: v, lower_bound_hit: false })
}
