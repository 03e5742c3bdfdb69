//! Swap, European and Bermudan valuation on a mapped lattice, future smiles and smile dynamics.
//!
//! Lattice values are rebased by the terminal bond `D_{N+1}`; today's value is
//! `D_{N+1}(0) E_0[V / D_{N+1}]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{implied_black_vol, AnalyticError, OptionKind, SwaptionSpec};
use crate::mapping::{MappingError, MfLattice};
use crate::quadrature::QuadratureError;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("exercise set is empty")]
    NoExercise,
    #[error("exercise date {0} outside 1..={1}")]
    BadExercise(usize, usize),
    #[error("conditioning date {from} must precede expiry {expiry}")]
    BadConditioning { from: usize, expiry: usize },
    #[error("node {0} outside the grid")]
    BadNode(usize),
}

/// A co-terminal Bermudan: exercise at `T_n` enters the swap `[T_n, T_{N+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BermudanTrade<T> {
    pub strike: T,
    pub kind: OptionKind,
    pub notional: T,
    /// 1-based reset numbers.
    pub exercise: Vec<usize>,
}

impl<T: Real> BermudanTrade<T> {
    fn check(&self, periods: usize) -> Result<Vec<bool>, PricingError> {
        if self.exercise.is_empty() {
            return Err(PricingError::NoExercise);
        }
        let mut flags = vec![false; periods];
        for &n in &self.exercise {
            if n == 0 || n > periods {
                return Err(PricingError::BadExercise(n, periods));
            }
            flags[n - 1] = true;
        }
        Ok(flags)
    }
}

/// Rebased values at one reset date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ValueDate<T> {
    /// Value of entering the swap now, `phi R_n (S_n - K)`.
    pub exercise: Vec<T>,
    /// `E_n[V_{n+1}]`.
    pub continuation: Vec<T>,
    pub bermudan: Vec<T>,
    pub exercisable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ValueLattice<T> {
    pub dates: Vec<ValueDate<T>>,
}

impl<T: Real> ValueLattice<T> {
    /// Nodes where exercising is strictly better than continuing; ties continue.
    pub fn exercise_region(&self, n: usize) -> Vec<bool> {
        let d = &self.dates[n - 1];
        d.exercise.iter().zip(&d.continuation).map(|(&e, &c)| d.exercisable && e > c).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BermudanValue<T> {
    pub value: T,
    pub lattice: ValueLattice<T>,
}

/// Rebased exercise value `phi R_n(x) (S_n(x) - K)` at reset `n`.
pub fn exercise_value<T: Real>(lattice: &MfLattice<T>, n: usize, strike: T, kind: OptionKind) -> Result<Vec<T>, PricingError> {
    let d = lattice.date(n)?;
    let phi: T = kind.phi();
    Ok(d.numeraire_ratio.iter().zip(&d.swap_rate).map(|(&r, &s)| phi * r * (s - strike)).collect())
}

/// Rebased value of the swap `[T_n, T_{N+1}]` at every reset `n`, built backward from LIBOR
/// coupons: the coupon fixed at `T_n` is paid at `T_{n+1}` and discounted with `D_{n+1}(T_n)`.
pub fn swap_value_lattice<T: Real>(
    lattice: &MfLattice<T>,
    strike: T,
    kind: OptionKind,
    notional: T,
) -> Result<Vec<Vec<T>>, PricingError> {
    let n_dates = lattice.periods();
    let phi: T = kind.phi();
    let mut out: Vec<Vec<T>> = vec![Vec::new(); n_dates];
    for i in (0..n_dates).rev() {
        let d = &lattice.dates[i];
        let alpha = lattice.strip.accruals[i];
        let coupon: Vec<T> = d
            .libor
            .iter()
            .zip(&d.numeraire_df)
            .map(|(&l, &df)| phi * notional * alpha * (l - strike) / ((T::one() + alpha * l) * df))
            .collect();
        out[i] = if i + 1 == n_dates {
            coupon
        } else {
            let cont = lattice.kernels.step(i, &out[i + 1])?;
            coupon.iter().zip(&cont).map(|(&a, &b)| a + b).collect()
        };
    }
    Ok(out)
}

/// Today's value of the swap `[T_n, T_{N+1}]`.
pub fn swap_value<T: Real>(lattice: &MfLattice<T>, n: usize, strike: T, kind: OptionKind, notional: T) -> Result<T, PricingError> {
    let ex = exercise_value(lattice, n, strike, kind)?;
    Ok(lattice.strip.numeraire() * lattice.kernels.today(n - 1, &ex)? * notional)
}

/// European swaption expiring at `T_n` on the co-terminal swap.
pub fn european_value<T: Real>(lattice: &MfLattice<T>, n: usize, strike: T, kind: OptionKind, notional: T) -> Result<T, PricingError> {
    let ex = exercise_value(lattice, n, strike, kind)?;
    let zero = vec![T::zero(); ex.len()];
    Ok(lattice.strip.numeraire() * lattice.kernels.today_max(n - 1, &ex, &zero)? * notional)
}

/// Backward induction over the exercise set; kinks at the exercise boundary are split exactly.
pub fn bermudan_value<T: Real>(lattice: &MfLattice<T>, trade: &BermudanTrade<T>) -> Result<BermudanValue<T>, PricingError> {
    let n_dates = lattice.periods();
    let flags = trade.check(n_dates)?;
    let k = &lattice.kernels;
    let mut dates: Vec<Option<ValueDate<T>>> = vec![None; n_dates];
    for i in (0..n_dates).rev() {
        let exercise = exercise_value(lattice, i + 1, trade.strike, trade.kind)?;
        let continuation = if i + 1 == n_dates {
            vec![T::zero(); exercise.len()]
        } else {
            let next = dates[i + 1].as_ref().unwrap();
            if next.exercisable {
                k.step_max(i, &next.exercise, &next.continuation)?
            } else {
                k.step(i, &next.bermudan)?
            }
        };
        let bermudan = if flags[i] {
            exercise.iter().zip(&continuation).map(|(&e, &c)| e.max(c)).collect()
        } else {
            continuation.clone()
        };
        dates[i] = Some(ValueDate { exercise, continuation, bermudan, exercisable: flags[i] });
    }
    let first = dates[0].as_ref().unwrap();
    let rebased = if first.exercisable {
        k.today_max(0, &first.exercise, &first.continuation)?
    } else {
        k.today(0, &first.bermudan)?
    };
    Ok(BermudanValue {
        value: lattice.strip.numeraire() * rebased * trade.notional,
        lattice: ValueLattice { dates: dates.into_iter().map(Option::unwrap).collect() },
    })
}

/// One strike of an implied-vol curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SmilePoint<T> {
    pub strike: T,
    /// Price per unit notional, rebased by the conditioning state's annuity.
    pub price: T,
    pub implied_vol: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Smile<T> {
    pub expiry: usize,
    /// Remaining time to expiry.
    pub time: T,
    pub forward: T,
    pub annuity: T,
    pub points: Vec<SmilePoint<T>>,
}

impl<T: Real> Smile<T> {
    /// Implied vol interpolated linearly in strike at the forward.
    pub fn atm_vol(&self) -> Option<T> {
        interpolate_vol(&self.points, self.forward)
    }
}

fn interpolate_vol<T: Real>(points: &[SmilePoint<T>], k: T) -> Option<T> {
    let pts: Vec<(T, T)> = points.iter().filter_map(|p| p.implied_vol.map(|v| (p.strike, v))).collect();
    for w in pts.windows(2) {
        if w[0].0 <= k && k <= w[1].0 {
            let t = (k - w[0].0) / (w[1].0 - w[0].0);
            return Some(w[0].1 + t * (w[1].1 - w[0].1));
        }
    }
    None
}

fn smile_from<T: Real>(expiry: usize, time: T, annuity: T, forward: T, prices: Vec<(T, T, OptionKind)>) -> Smile<T> {
    let points = prices
        .into_iter()
        .map(|(strike, price, kind)| {
            let spec = SwaptionSpec { expiry: time, forward, pvbp: annuity, strike, kind, notional: T::one() };
            let implied_vol = implied_black_vol(&spec, price).ok().filter(|v| !v.lower_bound_hit).map(|v| v.vol);
            SmilePoint { strike, price, implied_vol }
        })
        .collect();
    Smile { expiry, time, forward, annuity, points }
}

/// Smile of the European expiring at `T_n` seen from reset `from` in state node `node`, or from
/// today when `from` is `None`. Out-of-the-money options are used on each side of the forward.
pub fn future_smile<T: Real>(
    lattice: &MfLattice<T>,
    n: usize,
    from: Option<(usize, usize)>,
    strikes: &[T],
) -> Result<Smile<T>, PricingError> {
    let d = lattice.date(n)?;
    let rs: Vec<T> = d.numeraire_ratio.iter().zip(&d.swap_rate).map(|(&r, &s)| r * s).collect();
    let k = &lattice.kernels;
    // conditional expectation of a function of X_n, optionally through a max with zero
    let cond = |f: &[T], kinked: bool| -> Result<T, PricingError> {
        let zero = vec![T::zero(); f.len()];
        match from {
            None => Ok(if kinked { k.today_max(n - 1, f, &zero)? } else { k.today(n - 1, f)? }),
            Some((fd, node)) => {
                if fd >= n || fd == 0 {
                    return Err(PricingError::BadConditioning { from: fd, expiry: n });
                }
                let mut v = if kinked { k.step_max(n - 2, f, &zero)? } else { k.step(n - 2, f)? };
                for i in (fd - 1..n - 2).rev() {
                    v = k.step(i, &v)?;
                }
                v.get(node).copied().ok_or(PricingError::BadNode(node))
            }
        }
    };
    let annuity = cond(&d.numeraire_ratio, false)?;
    let forward = cond(&rs, false)? / annuity;
    let time = match from {
        None => d.time,
        Some((fd, _)) => d.time - lattice.dates[fd - 1].time,
    };
    let mut prices = Vec::with_capacity(strikes.len());
    for &strike in strikes {
        let kind = if strike >= forward { OptionKind::Payer } else { OptionKind::Receiver };
        let ex = exercise_value(lattice, n, strike, kind)?;
        prices.push((strike, cond(&ex, true)?, kind));
    }
    Ok(smile_from(n, time, annuity, forward, prices))
}

/// Smiles before and after a market move, with the mapping model held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SmileDynamics<T> {
    pub base: Smile<T>,
    pub bumped: Smile<T>,
}

impl<T: Real> SmileDynamics<T> {
    /// Fixed-strike change of the implied vol at the base forward.
    pub fn atm_move(&self) -> Option<T> {
        Some(interpolate_vol(&self.bumped.points, self.base.forward)? - self.base.atm_vol()?)
    }

    /// Largest change of implied vol at equal moneyness `K / S` over the base strikes whose
    /// moneyness is quoted in the bumped smile.
    pub fn max_moneyness_shift(&self) -> Option<T> {
        let ratio = self.bumped.forward / self.base.forward;
        let mut worst: Option<T> = None;
        for p in &self.base.points {
            let (Some(v0), k) = (p.implied_vol, p.strike) else { continue };
            if let Some(v1) = interpolate_vol(&self.bumped.points, k * ratio) {
                let d = (v1 - v0).abs();
                worst = Some(worst.map_or(d, |w: T| w.max(d)));
            }
        }
        worst
    }
}

/// Today's smiles of expiry `n` on two lattices built with the same mapping models.
pub fn smile_dynamics<T: Real>(
    base: &MfLattice<T>,
    bumped: &MfLattice<T>,
    n: usize,
    moneyness: &[T],
) -> Result<SmileDynamics<T>, PricingError> {
    let s0 = base.strip.swap_rate(n);
    let s1 = bumped.strip.swap_rate(n);
    let k0: Vec<T> = moneyness.iter().map(|&m| m * s0).collect();
    let k1: Vec<T> = moneyness.iter().map(|&m| m * s1).collect();
    Ok(SmileDynamics { base: future_smile(base, n, None, &k0)?, bumped: future_smile(bumped, n, None, &k1)? })
}
