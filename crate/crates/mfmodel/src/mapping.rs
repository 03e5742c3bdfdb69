//! Digital mapping: backward induction of the functional forms `S_n(x)`, `P_n(x)/D_{N+1}(x)`,
//! `D_{N+1}(x)` and `L_n(x)` on the driver lattice.
//!
//! Reset numbers `n` in the public API are 1-based (`T_1 .. T_N` are reset dates, `T_{N+1}` the
//! final payment date); vectors are stored 0-based.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError, Mixture, OptionKind, SwaptionSpec, UvddParams};
use crate::driver::{variance, DriverError, DriverSpec};
use crate::normal::{inv_norm_cdf, norm_cdf, norm_pdf, norm_sf};
use crate::quadrature::{PiecewisePoly, QuadratureError, TransitionKernel};
use crate::roots::{brent, RootError};
use crate::scalar::{lit, Real};

pub const DUMP_VERSION: u32 = 1;

/// Smallest probability handed to the inverse normal.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("reset {date}: swap-rate inversion failed at node {node}: {source}")]
    Inversion { date: usize, node: usize, source: RootError },
    #[error("reset {date}: numeraire {value} at node {node} is not positive and finite")]
    BadNumeraire { date: usize, node: usize, value: f64 },
    #[error("invalid strip: {0}")]
    Strip(String),
    #[error("{0} mapping models supplied for {1} reset dates")]
    ModelCount(usize, usize),
    #[error("kernels were built for different reset times or grid")]
    KernelMismatch,
    #[error("reset {0} is outside 1..={1}")]
    ResetOutOfRange(usize, usize),
    #[error("lattice dump version {0} is not supported")]
    DumpVersion(u32),
    #[error("lattice dump: {0}")]
    Dump(#[from] serde_json::Error),
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Today's view of a co-terminal deal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MarketStrip<T> {
    /// Day offsets of `T_1 .. T_{N+1}`.
    pub days: Vec<T>,
    /// Model (and option) times of `T_1 .. T_{N+1}`.
    pub times: Vec<T>,
    /// `alpha_1 .. alpha_N`.
    pub accruals: Vec<T>,
    /// `D_1(0) .. D_{N+1}(0)`.
    pub discounts: Vec<T>,
}

impl<T: Real> MarketStrip<T> {
    pub fn new(days: Vec<T>, times: Vec<T>, accruals: Vec<T>, discounts: Vec<T>) -> Result<Self, MappingError> {
        let s = Self { days, times, accruals, discounts };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let n = self.times.len();
        if n < 2 || self.days.len() != n || self.discounts.len() != n || self.accruals.len() != n - 1 {
            return Err(MappingError::Strip("inconsistent lengths".into()));
        }
        if self.times[0] <= T::zero() || self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MappingError::Strip("times must be positive and increasing".into()));
        }
        if self.accruals.iter().any(|a| !(*a > T::zero())) {
            return Err(MappingError::Strip("accruals must be positive".into()));
        }
        if self.discounts.iter().any(|d| !(*d > T::zero()) || !d.is_finite()) {
            return Err(MappingError::Strip("discount factors must be positive".into()));
        }
        Ok(())
    }

    /// Number of reset dates `N`.
    pub fn periods(&self) -> usize {
        self.accruals.len()
    }

    fn check_reset(&self, n: usize) -> Result<(), MappingError> {
        if n == 0 || n > self.periods() {
            return Err(MappingError::ResetOutOfRange(n, self.periods()));
        }
        Ok(())
    }

    /// `P_n(0) = sum_{k=n}^{N} alpha_k D_{k+1}(0)`.
    pub fn pvbp(&self, n: usize) -> T {
        (n - 1..self.periods()).fold(T::zero(), |acc, k| acc + self.accruals[k] * self.discounts[k + 1])
    }

    /// `S_n(0) = (D_n(0) - D_{N+1}(0)) / P_n(0)`.
    pub fn swap_rate(&self, n: usize) -> T {
        (self.discounts[n - 1] - self.discounts[self.periods()]) / self.pvbp(n)
    }

    pub fn expiry(&self, n: usize) -> T {
        self.times[n - 1]
    }

    /// Terminal numeraire `D_{N+1}(0)`.
    pub fn numeraire(&self) -> T {
        self.discounts[self.periods()]
    }

    /// European on the swap starting at `T_n`.
    pub fn swaption(&self, n: usize, strike: T, kind: OptionKind, notional: T) -> SwaptionSpec<T> {
        SwaptionSpec { expiry: self.expiry(n), forward: self.swap_rate(n), pvbp: self.pvbp(n), strike, kind, notional }
    }

    pub fn with_discounts(&self, discounts: Vec<T>) -> Result<Self, MappingError> {
        Self::new(self.days.clone(), self.times.clone(), self.accruals.clone(), discounts)
    }

    /// Shifts all discount factors by a continuously compounded ACT/365 zero-rate move.
    pub fn parallel_bump(&self, shift: T) -> Result<Self, MappingError> {
        let d365: T = lit(365.0);
        let d = self.days.iter().zip(&self.discounts).map(|(&day, &df)| df * (-shift * day / d365).exp()).collect();
        self.with_discounts(d)
    }

    /// Adds `bump` to the single discount factor `D_k(0)` (1-based, `k <= N + 1`).
    pub fn discount_bump(&self, k: usize, bump: T) -> Result<Self, MappingError> {
        if k == 0 || k > self.discounts.len() {
            return Err(MappingError::ResetOutOfRange(k, self.discounts.len()));
        }
        let mut d = self.discounts.clone();
        d[k - 1] = d[k - 1] + bump;
        self.with_discounts(d)
    }
}

/// Terminal-law model used to price the digitals of one expiry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "snake_case")]
pub enum MappingModel<T> {
    Black { vol: T },
    Displaced { displacement: T, vol: T },
    Uvdd(UvddParams<T>),
}

impl<T: Real> MappingModel<T> {
    pub fn mixture(&self) -> Result<Mixture<T>, AnalyticError> {
        match *self {
            MappingModel::Black { vol } => Mixture::displaced(T::zero(), vol),
            MappingModel::Displaced { displacement, vol } => Mixture::displaced(displacement, vol),
            MappingModel::Uvdd(p) => p.mixture(),
        }
    }

    pub fn displacement(&self) -> T {
        match *self {
            MappingModel::Black { .. } => T::zero(),
            MappingModel::Displaced { displacement, .. } => displacement,
            MappingModel::Uvdd(p) => p.displacement,
        }
    }

    pub fn european(&self, spec: &SwaptionSpec<T>) -> Result<T, AnalyticError> {
        analytic::mixture_european(spec, &self.mixture()?)
    }

    pub fn digital(&self, spec: &SwaptionSpec<T>) -> Result<T, AnalyticError> {
        analytic::mixture_digital(spec, &self.mixture()?)
    }

    /// Swap rate whose receiver digital probability equals `N(z)`.
    pub fn invert(&self, z: T, s0: T, t: T) -> Result<T, RootError> {
        let half: T = lit(0.5);
        let st = t.sqrt();
        let closed = |m: T, vol: T| (s0 + m) * (-half * vol * vol * t + vol * st * z).exp() - m;
        match *self {
            MappingModel::Black { vol } => Ok(closed(T::zero(), vol)),
            MappingModel::Displaced { displacement, vol } => Ok(closed(displacement, vol)),
            MappingModel::Uvdd(p) => {
                if p.lambda == T::one() || p.sigma1 == p.sigma2 {
                    return Ok(closed(p.displacement, p.sigma1));
                }
                if p.lambda == T::zero() {
                    return Ok(closed(p.displacement, p.sigma2));
                }
                let u = solve_mixture_quantile(&[(p.lambda, p.sigma1 * st), (T::one() - p.lambda, p.sigma2 * st)], z)?;
                Ok((s0 + p.displacement) * u.exp() - p.displacement)
            }
        }
    }
}

/// Solves `sum w_i N((u + s_i^2 / 2) / s_i) = N(z)` for the log-moneyness `u`.
/// The upper tail is matched through the complementary form when `z > 0`.
fn solve_mixture_quantile<T: Real>(comps: &[(T, T)], z: T) -> Result<T, RootError> {
    let half: T = lit(0.5);
    let upper = z > T::zero();
    let target = if upper { norm_sf(z) } else { norm_cdf(z) };
    // g is increasing in u in both branches
    let g = |u: T| -> (T, T) {
        let mut v = T::zero();
        let mut dv = T::zero();
        for &(w, s) in comps {
            let d = (u + half * s * s) / s;
            let p = if upper { norm_sf(d) } else { norm_cdf(d) };
            v = v + w * p;
            dv = dv + w * norm_pdf(d) / s;
        }
        if upper {
            (target - v, dv)
        } else {
            (v - target, dv)
        }
    };
    let sbar = comps.iter().fold(T::zero(), |acc, &(w, s)| acc + w * s);
    let smax = comps.iter().fold(T::zero(), |acc, &(_, s)| acc.max(s));
    let u0 = -half * sbar * sbar + sbar * z;
    let tol = target * lit::<T>(1e-12).max(T::epsilon() * lit(8.0));
    let (mut lo, mut hi) = (u0, u0);
    let mut step = smax;
    let mut found = false;
    for _ in 0..60 {
        lo = lo - step;
        hi = hi + step;
        if g(lo).0 < T::zero() && g(hi).0 > T::zero() {
            found = true;
            break;
        }
        step = step + step;
    }
    if !found {
        return Err(RootError::NotBracketed { lo: to_f64(lo), hi: to_f64(hi), flo: to_f64(g(lo).0), fhi: to_f64(g(hi).0) });
    }
    let mut u = u0;
    for _ in 0..200 {
        let (v, dv) = g(u);
        if v.abs() <= tol {
            return Ok(u);
        }
        if v < T::zero() {
            lo = u;
        } else {
            hi = u;
        }
        let newton = if dv > T::zero() { u - v / dv } else { lo - T::one() };
        u = if newton > lo && newton < hi { newton } else { half * (lo + hi) };
        if hi - lo <= T::epsilon() * (T::one() + u.abs()) * lit(4.0) {
            return Ok(u);
        }
    }
    brent(|u| g(u).0, lo, hi, T::epsilon() * lit(4.0), tol, 200)
}

/// Smile family applied uniformly across expiries, each calibrated to its ATM Black price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MappingCase {
    Black,
    Displaced { displacement: f64 },
    Uvdd { displacement: f64, omega: f64, lambda: f64 },
}

impl MappingCase {
    /// The eight test cases: 1 Black, 2-4 displaced diffusion, 5-8 UVDD.
    pub fn numbered(case: u8) -> Option<Self> {
        Some(match case {
            1 => MappingCase::Black,
            2 => MappingCase::Displaced { displacement: 0.025 },
            3 => MappingCase::Displaced { displacement: 0.05 },
            4 => MappingCase::Displaced { displacement: -0.025 },
            5 => MappingCase::Uvdd { displacement: 0.0, omega: 2.0, lambda: 0.75 },
            6 => MappingCase::Uvdd { displacement: 0.0, omega: 5.0, lambda: 0.75 },
            7 => MappingCase::Uvdd { displacement: 0.025, omega: 2.0, lambda: 0.75 },
            8 => MappingCase::Uvdd { displacement: 0.025, omega: 3.0, lambda: 0.75 },
            _ => return None,
        })
    }

    /// Model for one expiry with `sigma1` solved so the ATM price equals Black at `atm_vol`.
    pub fn resolve<T: Real>(&self, spec_atm: &SwaptionSpec<T>, atm_vol: T) -> Result<MappingModel<T>, AnalyticError> {
        match *self {
            MappingCase::Black => Ok(MappingModel::Black { vol: atm_vol }),
            MappingCase::Displaced { displacement } => {
                let p = UvddParams::from_omega(lit(displacement), atm_vol, T::one(), T::one());
                let s = adjust_sigma_to_atm(spec_atm, &p, atm_vol)?;
                Ok(MappingModel::Displaced { displacement: lit(displacement), vol: s })
            }
            MappingCase::Uvdd { displacement, omega, lambda } => {
                let p = UvddParams::from_omega(lit(displacement), atm_vol, lit(omega), lit(lambda));
                let s = adjust_sigma_to_atm(spec_atm, &p, atm_vol)?;
                Ok(MappingModel::Uvdd(p.with_sigma1(s)))
            }
        }
    }

    /// Resolves one model per reset date from ATM Black vols.
    pub fn resolve_strip<T: Real>(&self, strip: &MarketStrip<T>, atm_vols: &[T]) -> Result<Vec<MappingModel<T>>, AnalyticError> {
        (1..=strip.periods())
            .map(|n| {
                let s0 = strip.swap_rate(n);
                self.resolve(&strip.swaption(n, s0, OptionKind::Payer, T::one()), atm_vols[n - 1])
            })
            .collect()
    }
}

/// `sigma1` (with `omega`, `m`, `lambda` fixed) such that the UVDD ATM price equals the Black ATM
/// price at `atm_vol`. `spec` must be at the money.
pub fn adjust_sigma_to_atm<T: Real>(spec: &SwaptionSpec<T>, params: &UvddParams<T>, atm_vol: T) -> Result<T, AnalyticError> {
    let target = analytic::black_european(spec, atm_vol)?;
    sigma1_for_price(spec, params, target)
}

/// `sigma1` in `[1e-6, 5]` reproducing `target` at the spec's strike.
pub fn sigma1_for_price<T: Real>(spec: &SwaptionSpec<T>, params: &UvddParams<T>, target: T) -> Result<T, AnalyticError> {
    let (lo, hi): (T, T) = (lit(1e-6), lit(5.0));
    let f = |s: T| analytic::uvdd_european(spec, &params.with_sigma1(s)).map(|v| v - target);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo > T::zero() || fhi < T::zero() {
        return Err(AnalyticError::NoSolution { lo: 1e-6, hi: 5.0 });
    }
    let tol = spec.pvbp * spec.notional * lit::<T>(1e-13).max(T::epsilon() * lit(16.0));
    brent(|s| f(s).unwrap_or(T::nan()), lo, hi, T::epsilon() * lit(4.0), tol, 300)
        .map_err(|_| AnalyticError::NoSolution { lo: 1e-6, hi: 5.0 })
}

/// Grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub steps_per_dev: usize,
    pub deviations: usize,
    pub order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { steps_per_dev: 10, deviations: 10, order: 3 }
    }
}

/// Lattice grids and Gaussian moment tables for one set of reset times and mean reversion.
/// Depends on neither the curve nor the smile, so it can be shared between bumped rebuilds.
#[derive(Debug, Clone)]
pub struct KernelSet<T> {
    pub mean_reversion: T,
    pub grid: GridSpec,
    /// Reset times `T_1 .. T_N`.
    pub times: Vec<T>,
    pub sds: Vec<T>,
    pub nodes: Vec<Vec<T>>,
    /// `transitions[i]`: from date `i` nodes to date `i + 1` values.
    pub transitions: Vec<TransitionKernel<T>>,
    /// `roots[i]`: from today (`X_0 = 0`) to date `i` values.
    pub roots: Vec<TransitionKernel<T>>,
}

impl<T: Real> KernelSet<T> {
    pub fn new(mean_reversion: T, reset_times: &[T], grid: GridSpec) -> Result<Self, MappingError> {
        let spec = DriverSpec::new(mean_reversion, reset_times.to_vec())?;
        let lattice = spec.build_grid(grid.steps_per_dev, grid.deviations)?;
        let nodes: Vec<Vec<T>> = lattice.dates.iter().map(|d| d.nodes.clone()).collect();
        let sds: Vec<T> = lattice.dates.iter().map(|d| d.sd).collect();
        let mut transitions = Vec::with_capacity(nodes.len().saturating_sub(1));
        for i in 0..nodes.len().saturating_sub(1) {
            let s = variance(mean_reversion, reset_times[i], reset_times[i + 1]).sqrt();
            transitions.push(TransitionKernel::new(&nodes[i + 1], &nodes[i], s, grid.order)?);
        }
        let roots = nodes
            .iter()
            .zip(&sds)
            .map(|(x, &sd)| TransitionKernel::new(x, &[T::zero()], sd, grid.order))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { mean_reversion, grid, times: reset_times.to_vec(), sds, nodes, transitions, roots })
    }

    pub fn dates(&self) -> usize {
        self.nodes.len()
    }

    /// `E[f(X_{i+1}) | X_i = x]` at every node of date `i` (0-based).
    pub fn step(&self, i: usize, f: &[T]) -> Result<Vec<T>, QuadratureError> {
        self.transitions[i].expect_values(f)
    }

    /// `E[max(f, g)(X_{i+1}) | X_i]` with kink splitting.
    pub fn step_max(&self, i: usize, f: &[T], g: &[T]) -> Result<Vec<T>, QuadratureError> {
        self.transitions[i].expect_max(f, g)
    }

    /// `E_0[f(X_i)]`.
    pub fn today(&self, i: usize, f: &[T]) -> Result<T, QuadratureError> {
        Ok(self.roots[i].expect_values(f)?[0])
    }

    /// `E_0[max(f, g)(X_i)]`.
    pub fn today_max(&self, i: usize, f: &[T], g: &[T]) -> Result<T, QuadratureError> {
        Ok(self.roots[i].expect_max(f, g)?[0])
    }
}

/// Functional forms at one reset date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MappedDate<T> {
    pub time: T,
    pub sd: T,
    pub x: Vec<T>,
    pub swap_rate: Vec<T>,
    /// `R_n(x) = P_n(x) / D_{N+1}(x)`.
    pub numeraire_ratio: Vec<T>,
    /// `D_{N+1}(x)`.
    pub numeraire_df: Vec<T>,
    /// `L_n(x)`, the LIBOR fixing for `[T_n, T_{n+1}]`.
    pub libor: Vec<T>,
    /// `D_{N+1}(0) int_{-inf}^{x} R_n dN`, the receiver digital in lattice terms.
    pub scaled_digital: Vec<T>,
    /// Nodes whose tail probability hit the floor before inversion.
    pub clamped_nodes: usize,
}

/// A mapped lattice ready for pricing.
#[derive(Debug, Clone)]
pub struct MfLattice<T: Real> {
    pub strip: MarketStrip<T>,
    pub models: Vec<MappingModel<T>>,
    pub kernels: Arc<KernelSet<T>>,
    pub dates: Vec<MappedDate<T>>,
}

/// Versioned serialisable form of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LatticeDump<T> {
    pub version: u32,
    pub mean_reversion: T,
    pub grid: GridSpec,
    pub strip: MarketStrip<T>,
    pub models: Vec<MappingModel<T>>,
    pub dates: Vec<MappedDate<T>>,
}

/// Outcome of the structural checks on a mapped lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// `S_n` strictly increasing on every date, ignoring the two outermost nodes on each side.
    pub swap_rate_increasing: bool,
    /// `D_{N+1}` in `(0, 1)` on every node.
    pub numeraire_in_unit_interval: bool,
    /// Nodes with `S_n <= 0`; where these exist `D_{N+1}` above one is expected.
    pub negative_rate_nodes: usize,
    pub numeraire_decreasing: bool,
    /// Largest `|D_k(0) lattice / D_k(0) curve - 1|` over `k = 1..N`.
    pub max_bond_error: f64,
    /// Largest `|D_{N+1}(0) E_0[R_n] / P_n(0) - 1|`.
    pub max_annuity_error: f64,
    /// Smallest R^2 of a linear fit of `ln S_n(x)` on `|x| <= sd_n`.
    pub min_log_linearity_r2: f64,
    pub clamped_nodes: usize,
}

impl<T: Real> MfLattice<T> {
    /// Maps `strip` with one model per reset date.
    pub fn build(
        strip: &MarketStrip<T>,
        models: &[MappingModel<T>],
        mean_reversion: T,
        grid: GridSpec,
    ) -> Result<Self, MappingError> {
        strip.validate()?;
        let kernels = Arc::new(KernelSet::new(mean_reversion, &strip.times[..strip.periods()], grid)?);
        Self::build_with_kernels(strip, models, kernels)
    }

    /// As [`build`](Self::build), reusing precomputed kernels for the same reset times.
    pub fn build_with_kernels(
        strip: &MarketStrip<T>,
        models: &[MappingModel<T>],
        kernels: Arc<KernelSet<T>>,
    ) -> Result<Self, MappingError> {
        strip.validate()?;
        let n_dates = strip.periods();
        if models.len() != n_dates {
            return Err(MappingError::ModelCount(models.len(), n_dates));
        }
        if kernels.dates() != n_dates || kernels.times.iter().zip(&strip.times).any(|(a, b)| a != b) {
            return Err(MappingError::KernelMismatch);
        }
        let d0 = strip.numeraire();
        let floor: T = lit(PROBABILITY_FLOOR);
        let mut dates: Vec<Option<MappedDate<T>>> = vec![None; n_dates];
        for i in (0..n_dates).rev() {
            let x = &kernels.nodes[i];
            let alpha = strip.accruals[i];
            // R_i and E_i[1 / D_{N+1}(X_{i+1})]
            let (ratio, inv_next) = if i + 1 == n_dates {
                (vec![alpha; x.len()], None)
            } else {
                let next = dates[i + 1].as_ref().unwrap();
                let inv: Vec<T> = next.numeraire_df.iter().map(|&d| T::one() / d).collect();
                let e_inv = kernels.step(i, &inv)?;
                let e_r = kernels.step(i, &next.numeraire_ratio)?;
                let r = e_inv.iter().zip(&e_r).map(|(&a, &b)| alpha * a + b).collect();
                (r, Some(e_inv))
            };
            let poly = PiecewisePoly::fit(x, &ratio, kernels.grid.order)?;
            let (lower, upper) = kernels.roots[i].cumulative(0, &poly)?;
            let n = i + 1;
            let p0 = strip.pvbp(n);
            let s0 = strip.swap_rate(n);
            let t = strip.expiry(n);
            let model = models[i];
            let mut swap_rate = Vec::with_capacity(x.len());
            let mut clamped = 0;
            for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
                let p = d0 * l / p0;
                let q = d0 * u / p0;
                let z = if p < q {
                    if p < floor {
                        clamped += 1;
                    }
                    inv_norm_cdf(p.max(floor))
                } else {
                    if q < floor {
                        clamped += 1;
                    }
                    -inv_norm_cdf(q.max(floor))
                };
                let s = model
                    .invert(z, s0, t)
                    .map_err(|source| MappingError::Inversion { date: n, node: j, source })?;
                swap_rate.push(s);
            }
            let mut numeraire_df = Vec::with_capacity(x.len());
            for (j, (&s, &r)) in swap_rate.iter().zip(&ratio).enumerate() {
                let d = T::one() / (T::one() + s * r);
                if !(d > T::zero()) || !d.is_finite() {
                    return Err(MappingError::BadNumeraire { date: n, node: j, value: to_f64(d) });
                }
                numeraire_df.push(d);
            }
            let libor = match &inv_next {
                None => numeraire_df.iter().map(|&d| (T::one() / d - T::one()) / alpha).collect(),
                Some(e_inv) => numeraire_df
                    .iter()
                    .zip(e_inv)
                    .map(|(&d, &e)| (T::one() / (d * e) - T::one()) / alpha)
                    .collect(),
            };
            dates[i] = Some(MappedDate {
                time: t,
                sd: kernels.sds[i],
                x: x.clone(),
                swap_rate,
                numeraire_ratio: ratio,
                numeraire_df,
                libor,
                scaled_digital: lower.iter().map(|&l| d0 * l).collect(),
                clamped_nodes: clamped,
            });
        }
        Ok(Self { strip: strip.clone(), models: models.to_vec(), kernels, dates: dates.into_iter().map(Option::unwrap).collect() })
    }

    pub fn periods(&self) -> usize {
        self.strip.periods()
    }

    pub fn date(&self, n: usize) -> Result<&MappedDate<T>, MappingError> {
        self.strip.check_reset(n)?;
        Ok(&self.dates[n - 1])
    }

    /// `E[f(X_k) | X_n = x]` for every node of `T_n`, stepping through the intermediate dates.
    pub fn condition(&self, n: usize, k: usize, f: &[T]) -> Result<Vec<T>, MappingError> {
        self.strip.check_reset(n)?;
        self.strip.check_reset(k)?;
        let mut v = f.to_vec();
        for i in (n - 1..k - 1).rev() {
            v = self.kernels.step(i, &v)?;
        }
        Ok(v)
    }

    /// Functional form of `D_k(T_n, x)` on the nodes of `T_n` for `n <= k <= N + 1`.
    pub fn reconstruct_bond(&self, k: usize, n: usize) -> Result<Vec<T>, MappingError> {
        self.strip.check_reset(n)?;
        let last = self.periods() + 1;
        if k < n || k > last {
            return Err(MappingError::ResetOutOfRange(k, last));
        }
        let d = &self.dates[n - 1].numeraire_df;
        if k == n {
            return Ok(vec![T::one(); d.len()]);
        }
        if k == last {
            return Ok(d.clone());
        }
        let inv: Vec<T> = self.dates[k - 1].numeraire_df.iter().map(|&v| T::one() / v).collect();
        let e = self.condition(n, k, &inv)?;
        Ok(d.iter().zip(&e).map(|(&a, &b)| a * b).collect())
    }

    /// `D_k(0)` implied by the lattice, `k = 1..N+1`.
    pub fn bond_today(&self, k: usize) -> Result<T, MappingError> {
        let last = self.periods() + 1;
        if k == 0 || k > last {
            return Err(MappingError::ResetOutOfRange(k, last));
        }
        let d0 = self.strip.numeraire();
        if k == last {
            return Ok(d0);
        }
        let inv: Vec<T> = self.dates[k - 1].numeraire_df.iter().map(|&v| T::one() / v).collect();
        Ok(d0 * self.kernels.today(k - 1, &inv)?)
    }

    /// `D_{N+1}(0) E_0[R_n(X_n)]`, which should equal `P_n(0)`.
    pub fn annuity_today(&self, n: usize) -> Result<T, MappingError> {
        self.strip.check_reset(n)?;
        Ok(self.strip.numeraire() * self.kernels.today(n - 1, &self.dates[n - 1].numeraire_ratio)?)
    }

    /// R^2 of the least-squares line through `(x, ln S_n(x))` for `|x| <= sd_n`.
    pub fn log_linearity_r2(&self, n: usize) -> Result<f64, MappingError> {
        let d = self.date(n)?;
        let sd = to_f64(d.sd);
        let pts: Vec<(f64, f64)> = d
            .x
            .iter()
            .zip(&d.swap_rate)
            .map(|(&x, &s)| (to_f64(x), to_f64(s)))
            .filter(|(x, s)| x.abs() <= sd * (1.0 + 1e-12) && *s > 0.0)
            .map(|(x, s)| (x, s.ln()))
            .collect();
        Ok(r_squared(&pts))
    }

    pub fn check_invariants(&self) -> Result<InvariantReport, MappingError> {
        let mut rep = InvariantReport {
            swap_rate_increasing: true,
            numeraire_in_unit_interval: true,
            negative_rate_nodes: 0,
            numeraire_decreasing: true,
            max_bond_error: 0.0,
            max_annuity_error: 0.0,
            min_log_linearity_r2: 1.0,
            clamped_nodes: 0,
        };
        for (i, d) in self.dates.iter().enumerate() {
            let m = d.x.len();
            let inner = 2..m.saturating_sub(2);
            for j in inner.clone().skip(1) {
                if !(d.swap_rate[j] > d.swap_rate[j - 1]) {
                    rep.swap_rate_increasing = false;
                }
                if d.numeraire_df[j] > d.numeraire_df[j - 1] {
                    rep.numeraire_decreasing = false;
                }
            }
            for j in 0..m {
                let v = d.numeraire_df[j];
                if !(v > T::zero() && v < T::one()) {
                    rep.numeraire_in_unit_interval = false;
                }
                if !(d.swap_rate[j] > T::zero()) {
                    rep.negative_rate_nodes += 1;
                }
            }
            rep.clamped_nodes += d.clamped_nodes;
            let n = i + 1;
            let bond = to_f64(self.bond_today(n)?) / to_f64(self.strip.discounts[n - 1]) - 1.0;
            rep.max_bond_error = rep.max_bond_error.max(bond.abs());
            let ann = to_f64(self.annuity_today(n)?) / to_f64(self.strip.pvbp(n)) - 1.0;
            rep.max_annuity_error = rep.max_annuity_error.max(ann.abs());
            rep.min_log_linearity_r2 = rep.min_log_linearity_r2.min(self.log_linearity_r2(n)?);
        }
        Ok(rep)
    }

    pub fn to_dump(&self) -> LatticeDump<T> {
        LatticeDump {
            version: DUMP_VERSION,
            mean_reversion: self.kernels.mean_reversion,
            grid: self.kernels.grid,
            strip: self.strip.clone(),
            models: self.models.clone(),
            dates: self.dates.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, MappingError> {
        Ok(serde_json::to_string_pretty(&self.to_dump())?)
    }

    /// Restores a lattice from a dump; kernels are rebuilt, functional forms are taken as stored.
    pub fn from_dump(dump: LatticeDump<T>) -> Result<Self, MappingError> {
        if dump.version != DUMP_VERSION {
            return Err(MappingError::DumpVersion(dump.version));
        }
        dump.strip.validate()?;
        let n = dump.strip.periods();
        if dump.models.len() != n || dump.dates.len() != n {
            return Err(MappingError::ModelCount(dump.models.len(), n));
        }
        let kernels = Arc::new(KernelSet::new(dump.mean_reversion, &dump.strip.times[..n], dump.grid)?);
        if kernels.nodes.iter().zip(&dump.dates).any(|(a, d)| a.len() != d.x.len()) {
            return Err(MappingError::KernelMismatch);
        }
        Ok(Self { strip: dump.strip, models: dump.models, kernels, dates: dump.dates })
    }

    pub fn from_json(s: &str) -> Result<Self, MappingError> {
        let dump: LatticeDump<T> = serde_json::from_str(s)?;
        Self::from_dump(dump)
    }
}

fn r_squared(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 3 {
        return 1.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_quantile_round_trip() {
        let comps = [(0.75, 0.2), (0.25, 0.6)];
        for &z in &[-9.0, -2.0, 0.0, 0.3, 4.0, 12.0] {
            let u = solve_mixture_quantile(&comps, z).unwrap();
            let back: f64 = comps.iter().map(|&(w, s)| w * norm_cdf((u + 0.5 * s * s) / s)).sum();
            let want = norm_cdf(z);
            assert!((back - want).abs() <= 1e-11 * want.min(1.0 - want).max(1e-300), "{z}");
        }
    }

    #[test]
    fn black_fixed_point() {
        let m = MappingModel::Black { vol: 0.2 };
        let t = 2.0f64;
        let z = 0.5 * 0.2 * t.sqrt();
        assert!((m.invert(z, 0.05, t).unwrap() - 0.05).abs() < 1e-16);
    }

    #[test]
    fn uvdd_reduces_to_black() {
        let u = MappingModel::Uvdd(UvddParams { displacement: 0.0, sigma1: 0.2, sigma2: 0.2, lambda: 0.4 });
        let b = MappingModel::Black { vol: 0.2f64 };
        for &z in &[-3.0f64, 0.0, 2.0] {
            assert!((u.invert(z, 0.05, 3.0).unwrap() - b.invert(z, 0.05, 3.0).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn numbered_cases() {
        assert!(MappingCase::numbered(0).is_none());
        assert!(MappingCase::numbered(9).is_none());
        assert_eq!(MappingCase::numbered(1), Some(MappingCase::Black));
    }
}
