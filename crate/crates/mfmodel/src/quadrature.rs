//! Integration of grid-sampled functions against normal densities.
//!
//! A grid function is turned into a piecewise polynomial by fitting, on every interval
//! `[x_j, x_{j+1}]`, the interpolating polynomial through `order + 1` neighbouring nodes.
//! Coefficients are stored in local coordinates `t = x - x_j`, which keeps the monomial
//! basis well conditioned on wide grids. Integrals against `N(mu, sigma^2)` then reduce to
//! partial Gaussian moments computed by recurrence.

use thiserror::Error;

use crate::normal::{norm_cdf, norm_pdf, norm_sf};
use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("duplicate abscissae in interpolation stencil")]
    DuplicateAbscissae,
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("need at least {need} grid points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("grid must be strictly increasing")]
    NotIncreasing,
    #[error("values and grid lengths differ ({values} vs {grid})")]
    LengthMismatch { values: usize, grid: usize },
    #[error("crossover {0} lies outside the grid")]
    CrossoverOutsideGrid(f64),
    #[error("moment order must be at least -1, got {0}")]
    BadOrder(i32),
}

/// Coefficients (constant term first) of the polynomial through `(xs[i], fs[i])`,
/// built with Neville's recurrence on coefficient vectors.
pub fn neville_coeffs<T: Real>(xs: &[T], fs: &[T]) -> Result<Vec<T>, QuadratureError> {
    if xs.len() != fs.len() {
        return Err(QuadratureError::LengthMismatch { values: fs.len(), grid: xs.len() });
    }
    if xs.is_empty() {
        return Err(QuadratureError::TooFewPoints { need: 1, got: 0 });
    }
    let n = xs.len();
    for i in 0..n {
        for j in i + 1..n {
            if xs[i] == xs[j] {
                return Err(QuadratureError::DuplicateAbscissae);
            }
        }
    }
    // table[i] holds the coefficients of the polynomial through points i..i+m
    let mut table: Vec<Vec<T>> = fs.iter().map(|&f| vec![f]).collect();
    for m in 1..n {
        let mut next = Vec::with_capacity(n - m);
        for i in 0..n - m {
            let left = &table[i];
            let right = &table[i + 1];
            let (xi, xim) = (xs[i], xs[i + m]);
            let denom = xi - xim;
            let mut c = vec![T::zero(); m + 1];
            for k in 0..=m {
                let lk = if k < m { left[k] } else { T::zero() };
                let rk = if k < m { right[k] } else { T::zero() };
                let lk1 = if k >= 1 { left[k - 1] } else { T::zero() };
                let rk1 = if k >= 1 { right[k - 1] } else { T::zero() };
                c[k] = (lk1 - xim * lk + xi * rk - rk1) / denom;
            }
            next.push(c);
        }
        table = next;
    }
    Ok(table.pop().expect("non-empty table"))
}

/// Evaluates a polynomial with constant-first coefficients.
#[inline]
pub fn poly_eval<T: Real>(c: &[T], x: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &k| acc * x + k)
}

/// Fills `out[k]` with the partial moments of `t^k` for a normal variable with mean `mu`
/// (already shifted to local coordinates) and the given tail quantities at the limit `h`.
/// When `upper` is set, the moments are over `[h, inf)`, otherwise over `(-inf, h]`.
#[inline]
fn moment_recurrence<T: Real>(h: T, mu: T, sigma: T, tail: T, dens: T, upper: bool, out: &mut [T]) {
    // dens = pdf((h - mu)/sigma); the boundary term is sigma * h^{k-1} * dens
    let s2 = sigma * sigma;
    let boundary = if h.is_finite() { sigma * dens } else { T::zero() };
    let mut gm2 = T::zero();
    let mut gm1 = tail;
    out[0] = tail;
    let mut hp = T::one();
    for k in 1..out.len() {
        let km1: T = from_usize(k - 1);
        let b = if boundary == T::zero() { T::zero() } else { boundary * hp };
        let g = if upper { mu * gm1 + km1 * s2 * gm2 + b } else { mu * gm1 + km1 * s2 * gm2 - b };
        out[k] = g;
        gm2 = gm1;
        gm1 = g;
        if h.is_finite() {
            hp = hp * h;
        }
    }
}

/// Partial moment `int_{-inf}^{h} x^k N(x; mu, sigma^2) dx`.
pub fn gaussian_partial_moment<T: Real>(k: i32, h: T, mu: T, sigma: T) -> Result<T, QuadratureError> {
    if sigma <= T::zero() {
        return Err(QuadratureError::NonPositiveSigma(sigma.to_f64().unwrap_or(f64::NAN)));
    }
    if k < -1 {
        return Err(QuadratureError::BadOrder(k));
    }
    if k == -1 {
        return Ok(T::zero());
    }
    let z = (h - mu) / sigma;
    let mut out = vec![T::zero(); k as usize + 1];
    moment_recurrence(h, mu, sigma, norm_cdf(z), norm_pdf(z), false, &mut out);
    Ok(out[k as usize])
}

/// Upper partial moment `int_{h}^{inf} x^k N(x; mu, sigma^2) dx`.
pub fn gaussian_upper_moment<T: Real>(k: i32, h: T, mu: T, sigma: T) -> Result<T, QuadratureError> {
    if sigma <= T::zero() {
        return Err(QuadratureError::NonPositiveSigma(sigma.to_f64().unwrap_or(f64::NAN)));
    }
    if k < -1 {
        return Err(QuadratureError::BadOrder(k));
    }
    if k == -1 {
        return Ok(T::zero());
    }
    let z = (h - mu) / sigma;
    let mut out = vec![T::zero(); k as usize + 1];
    moment_recurrence(h, mu, sigma, norm_sf(z), norm_pdf(z), true, &mut out);
    Ok(out[k as usize])
}

/// Normal law whose partial moments are evaluated on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> GaussianMoments<T> {
    pub fn new(mu: T, sigma: T) -> Result<Self, QuadratureError> {
        if !(sigma > T::zero()) {
            return Err(QuadratureError::NonPositiveSigma(sigma.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { mu, sigma })
    }

    /// `G(k; h)` for k = 0..=kmax.
    pub fn lower(&self, h: T, kmax: usize) -> Vec<T> {
        let z = (h - self.mu) / self.sigma;
        let mut out = vec![T::zero(); kmax + 1];
        moment_recurrence(h, self.mu, self.sigma, norm_cdf(z), norm_pdf(z), false, &mut out);
        out
    }

    /// Moments of `(x - origin)^k` over `[a, b]`, written into `out`.
    pub fn segment(&self, a: T, b: T, origin: T, out: &mut [T]) {
        let za = (a - self.mu) / self.sigma;
        let zb = (b - self.mu) / self.sigma;
        segment_from_z(a - origin, b - origin, self.mu - origin, self.sigma, za, zb, out);
    }
}

/// Segment moments from standardised limits. Segments lying above the mean are evaluated
/// as differences of upper-tail moments so that nothing cancels against a value near one.
#[inline]
fn segment_from_z<T: Real>(a: T, b: T, mu: T, sigma: T, za: T, zb: T, out: &mut [T]) {
    let n = out.len();
    let mut ga = [T::zero(); 16];
    let mut gb = [T::zero(); 16];
    debug_assert!(n <= 16);
    if za >= T::zero() {
        moment_recurrence(a, mu, sigma, norm_sf(za), norm_pdf(za), true, &mut ga[..n]);
        moment_recurrence(b, mu, sigma, norm_sf(zb), norm_pdf(zb), true, &mut gb[..n]);
        for k in 0..n {
            out[k] = ga[k] - gb[k];
        }
    } else {
        moment_recurrence(a, mu, sigma, norm_cdf(za), norm_pdf(za), false, &mut ga[..n]);
        moment_recurrence(b, mu, sigma, norm_cdf(zb), norm_pdf(zb), false, &mut gb[..n]);
        for k in 0..n {
            out[k] = gb[k] - ga[k];
        }
    }
}

/// First stencil index for interval `j` on a grid of `n` nodes.
#[inline]
pub fn stencil_start(j: usize, n: usize, order: usize) -> usize {
    let lo = j as isize - (order / 2) as isize;
    lo.clamp(0, (n - 1 - order) as isize) as usize
}

fn check_grid<T: Real>(x: &[T], order: usize) -> Result<(), QuadratureError> {
    if x.len() < order + 1 || x.len() < 2 {
        return Err(QuadratureError::TooFewPoints { need: (order + 1).max(2), got: x.len() });
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QuadratureError::NotIncreasing);
    }
    Ok(())
}

/// Piecewise polynomial fitted to values on a grid, with constant extension beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly<T> {
    x: Vec<T>,
    order: usize,
    coeffs: Vec<T>,
    first: T,
    last: T,
}

impl<T: Real> PiecewisePoly<T> {
    pub fn fit(x: &[T], f: &[T], order: usize) -> Result<Self, QuadratureError> {
        check_grid(x, order)?;
        if f.len() != x.len() {
            return Err(QuadratureError::LengthMismatch { values: f.len(), grid: x.len() });
        }
        let n = x.len();
        let w = order + 1;
        let mut coeffs = Vec::with_capacity((n - 1) * w);
        let mut xs = vec![T::zero(); w];
        for j in 0..n - 1 {
            let lo = stencil_start(j, n, order);
            for (i, xi) in xs.iter_mut().enumerate() {
                *xi = x[lo + i] - x[j];
            }
            coeffs.extend(neville_coeffs(&xs, &f[lo..lo + w])?);
        }
        Ok(Self { x: x.to_vec(), order, coeffs, first: f[0], last: f[n - 1] })
    }

    pub fn grid(&self) -> &[T] {
        &self.x
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Local coefficients of interval `j`.
    pub fn interval(&self, j: usize) -> &[T] {
        let w = self.order + 1;
        &self.coeffs[j * w..(j + 1) * w]
    }

    fn locate(&self, x: T) -> Option<usize> {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] {
            return None;
        }
        let j = self.x.partition_point(|&v| v <= x);
        Some(j.saturating_sub(1).min(n - 2))
    }

    /// Evaluates the fit; constant beyond the grid ends.
    pub fn eval(&self, x: T) -> T {
        match self.locate(x) {
            Some(j) => poly_eval(self.interval(j), x - self.x[j]),
            None if x < self.x[0] => self.first,
            None => self.last,
        }
    }

    /// `int f(x) N(x; mu, sigma^2) dx` over the real line.
    pub fn integrate(&self, mu: T, sigma: T) -> Result<T, QuadratureError> {
        let g = GaussianMoments::new(mu, sigma)?;
        let w = self.order + 1;
        let mut m = vec![T::zero(); w];
        let mut total = self.first * norm_cdf((self.x[0] - mu) / sigma)
            + self.last * norm_sf((self.x[self.x.len() - 1] - mu) / sigma);
        for j in 0..self.x.len() - 1 {
            g.segment(self.x[j], self.x[j + 1], self.x[j], &mut m);
            total = total + dot(self.interval(j), &m);
        }
        Ok(total)
    }

    /// Cumulative integrals at every node: `lower[i] = int_{-inf}^{x_i} f dN` and
    /// `upper[i] = int_{x_i}^{inf} f dN`.
    pub fn cumulative(&self, mu: T, sigma: T) -> Result<(Vec<T>, Vec<T>), QuadratureError> {
        let g = GaussianMoments::new(mu, sigma)?;
        let n = self.x.len();
        let mut m = vec![T::zero(); self.order + 1];
        let seg: Vec<T> = (0..n - 1)
            .map(|j| {
                g.segment(self.x[j], self.x[j + 1], self.x[j], &mut m);
                dot(self.interval(j), &m)
            })
            .collect();
        let lo_tail = self.first * norm_cdf((self.x[0] - mu) / sigma);
        let hi_tail = self.last * norm_sf((self.x[n - 1] - mu) / sigma);
        Ok(accumulate(&seg, lo_tail, hi_tail))
    }
}

fn accumulate<T: Real>(seg: &[T], lo_tail: T, hi_tail: T) -> (Vec<T>, Vec<T>) {
    let n = seg.len() + 1;
    let mut lower = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    lower[0] = lo_tail;
    for j in 0..seg.len() {
        lower[j + 1] = lower[j] + seg[j];
    }
    upper[n - 1] = hi_tail;
    for j in (0..seg.len()).rev() {
        upper[j] = upper[j + 1] + seg[j];
    }
    (lower, upper)
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Convenience: fit and integrate in one call.
pub fn integrate_grid_function<T: Real>(x: &[T], f: &[T], mu: T, sigma: T, order: usize) -> Result<T, QuadratureError> {
    PiecewisePoly::fit(x, f, order)?.integrate(mu, sigma)
}

/// Locates the zero of `p - q` on interval `j` by bisection; the caller guarantees a sign change.
fn crossover<T: Real>(p: &PiecewisePoly<T>, q: &PiecewisePoly<T>, j: usize) -> T {
    let (x0, x1) = (p.x[j], p.x[j + 1]);
    let (cp, cq) = (p.interval(j), q.interval(j));
    let d = |t: T| poly_eval(cp, t) - poly_eval(cq, t);
    let xtol = lit::<T>(1e-12) * (T::one() + x0.abs().max(x1.abs()));
    let mut a = T::zero();
    let mut b = x1 - x0;
    let da_pos = d(a) > T::zero();
    let half: T = lit(0.5);
    for _ in 0..200 {
        let mid = half * (a + b);
        if b - a <= xtol || mid == a || mid == b {
            break;
        }
        if (d(mid) > T::zero()) == da_pos {
            a = mid;
        } else {
            b = mid;
        }
    }
    x0 + half * (a + b)
}

/// How one interval of a kinked integrand is assembled.
#[derive(Debug, Clone, Copy)]
enum Piece<T> {
    Whole { use_first: bool },
    Split { at: T, first_below: bool },
}

fn plan_max<T: Real>(f: &PiecewisePoly<T>, g: &PiecewisePoly<T>, fv: &[T], gv: &[T]) -> Vec<Piece<T>> {
    let n = fv.len();
    (0..n - 1)
        .map(|j| {
            let d0 = fv[j] - gv[j];
            let d1 = fv[j + 1] - gv[j + 1];
            if (d0 > T::zero() && d1 < T::zero()) || (d0 < T::zero() && d1 > T::zero()) {
                Piece::Split { at: crossover(f, g, j), first_below: d0 > T::zero() }
            } else {
                Piece::Whole { use_first: d0 + d1 >= T::zero() }
            }
        })
        .collect()
}

/// `E[max(f, g)]` for `X ~ N(mu, sigma^2)` with both functions given on the same grid.
/// Intervals where `f - g` changes sign are split at the crossover.
pub fn integrate_max<T: Real>(x: &[T], f: &[T], g: &[T], mu: T, sigma: T, order: usize) -> Result<T, QuadratureError> {
    let pf = PiecewisePoly::fit(x, f, order)?;
    let pg = PiecewisePoly::fit(x, g, order)?;
    if g.len() != x.len() {
        return Err(QuadratureError::LengthMismatch { values: g.len(), grid: x.len() });
    }
    let plan = plan_max(&pf, &pg, f, g);
    let gm = GaussianMoments::new(mu, sigma)?;
    let n = x.len();
    let mut m = vec![T::zero(); order + 1];
    let mut total = f[0].max(g[0]) * norm_cdf((x[0] - mu) / sigma) + f[n - 1].max(g[n - 1]) * norm_sf((x[n - 1] - mu) / sigma);
    for (j, piece) in plan.iter().enumerate() {
        match *piece {
            Piece::Whole { use_first } => {
                gm.segment(x[j], x[j + 1], x[j], &mut m);
                let c = if use_first { pf.interval(j) } else { pg.interval(j) };
                total = total + dot(c, &m);
            }
            Piece::Split { at, first_below } => {
                let (below, above) = if first_below { (pf.interval(j), pg.interval(j)) } else { (pg.interval(j), pf.interval(j)) };
                gm.segment(x[j], at, x[j], &mut m);
                total = total + dot(below, &m);
                gm.segment(at, x[j + 1], x[j], &mut m);
                total = total + dot(above, &m);
            }
        }
    }
    Ok(total)
}

/// Integrates `f_left` below the crossover and `f_right` above it.
pub fn integrate_with_kink<T: Real>(
    x: &[T],
    f_left: &[T],
    f_right: &[T],
    crossover_at: T,
    mu: T,
    sigma: T,
    order: usize,
) -> Result<T, QuadratureError> {
    let n = x.len();
    check_grid(x, order)?;
    if !(crossover_at >= x[0] && crossover_at <= x[n - 1]) {
        return Err(QuadratureError::CrossoverOutsideGrid(crossover_at.to_f64().unwrap_or(f64::NAN)));
    }
    let pl = PiecewisePoly::fit(x, f_left, order)?;
    let pr = PiecewisePoly::fit(x, f_right, order)?;
    let gm = GaussianMoments::new(mu, sigma)?;
    let mut m = vec![T::zero(); order + 1];
    let mut total = f_left[0] * norm_cdf((x[0] - mu) / sigma) + f_right[n - 1] * norm_sf((x[n - 1] - mu) / sigma);
    for j in 0..n - 1 {
        if x[j + 1] <= crossover_at {
            gm.segment(x[j], x[j + 1], x[j], &mut m);
            total = total + dot(pl.interval(j), &m);
        } else if x[j] >= crossover_at {
            gm.segment(x[j], x[j + 1], x[j], &mut m);
            total = total + dot(pr.interval(j), &m);
        } else {
            gm.segment(x[j], crossover_at, x[j], &mut m);
            total = total + dot(pl.interval(j), &m);
            gm.segment(crossover_at, x[j + 1], x[j], &mut m);
            total = total + dot(pr.interval(j), &m);
        }
    }
    Ok(total)
}

/// Precomputed local moments of every grid interval against a family of normal laws
/// `N(mu_i, sigma^2)` sharing one standard deviation. Expectations of any function fitted on
/// the grid then cost one dot product per interval.
#[derive(Debug, Clone)]
pub struct TransitionKernel<T> {
    grid: Vec<T>,
    targets: Vec<T>,
    sigma: T,
    order: usize,
    moments: Vec<T>,
    lower_tail: Vec<T>,
    upper_tail: Vec<T>,
}

impl<T: Real> TransitionKernel<T> {
    pub fn new(grid: &[T], targets: &[T], sigma: T, order: usize) -> Result<Self, QuadratureError> {
        check_grid(grid, order)?;
        if !(sigma > T::zero()) {
            return Err(QuadratureError::NonPositiveSigma(sigma.to_f64().unwrap_or(f64::NAN)));
        }
        let n = grid.len();
        let w = order + 1;
        let mut moments = vec![T::zero(); targets.len() * (n - 1) * w];
        let mut lower_tail = Vec::with_capacity(targets.len());
        let mut upper_tail = Vec::with_capacity(targets.len());
        let mut z = vec![T::zero(); n];
        let mut cdf = vec![T::zero(); n];
        let mut sf = vec![T::zero(); n];
        let mut pdf = vec![T::zero(); n];
        let cut: T = lit(40.0);
        let mut ga = [T::zero(); 16];
        let mut gb = [T::zero(); 16];
        for (t, &mu) in targets.iter().enumerate() {
            for i in 0..n {
                z[i] = (grid[i] - mu) / sigma;
                if z[i] < -cut {
                    cdf[i] = T::zero();
                    sf[i] = T::one();
                    pdf[i] = T::zero();
                } else if z[i] > cut {
                    cdf[i] = T::one();
                    sf[i] = T::zero();
                    pdf[i] = T::zero();
                } else {
                    cdf[i] = norm_cdf(z[i]);
                    sf[i] = norm_sf(z[i]);
                    pdf[i] = norm_pdf(z[i]);
                }
            }
            lower_tail.push(cdf[0]);
            upper_tail.push(sf[n - 1]);
            let row = &mut moments[t * (n - 1) * w..(t + 1) * (n - 1) * w];
            for j in 0..n - 1 {
                if z[j + 1] < -cut || z[j] > cut {
                    continue;
                }
                let origin = grid[j];
                let (a, b, m) = (T::zero(), grid[j + 1] - origin, mu - origin);
                let out = &mut row[j * w..(j + 1) * w];
                if z[j] >= T::zero() {
                    moment_recurrence(a, m, sigma, sf[j], pdf[j], true, &mut ga[..w]);
                    moment_recurrence(b, m, sigma, sf[j + 1], pdf[j + 1], true, &mut gb[..w]);
                    for k in 0..w {
                        out[k] = ga[k] - gb[k];
                    }
                } else {
                    moment_recurrence(a, m, sigma, cdf[j], pdf[j], false, &mut ga[..w]);
                    moment_recurrence(b, m, sigma, cdf[j + 1], pdf[j + 1], false, &mut gb[..w]);
                    for k in 0..w {
                        out[k] = gb[k] - ga[k];
                    }
                }
            }
        }
        Ok(Self { grid: grid.to_vec(), targets: targets.to_vec(), sigma, order, moments, lower_tail, upper_tail })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn row(&self, t: usize) -> &[T] {
        let w = (self.grid.len() - 1) * (self.order + 1);
        &self.moments[t * w..(t + 1) * w]
    }

    fn check(&self, p: &PiecewisePoly<T>) -> Result<(), QuadratureError> {
        if p.x.len() != self.grid.len() || p.order != self.order {
            return Err(QuadratureError::LengthMismatch { values: p.x.len(), grid: self.grid.len() });
        }
        Ok(())
    }

    /// Integrals of `p` over each grid interval for target `t`.
    pub fn segments(&self, t: usize, p: &PiecewisePoly<T>) -> Result<Vec<T>, QuadratureError> {
        self.check(p)?;
        let w = self.order + 1;
        let row = self.row(t);
        Ok((0..self.grid.len() - 1).map(|j| dot(p.interval(j), &row[j * w..(j + 1) * w])).collect())
    }

    /// Lower and upper cumulative integrals of `p` at every node, for target `t`.
    pub fn cumulative(&self, t: usize, p: &PiecewisePoly<T>) -> Result<(Vec<T>, Vec<T>), QuadratureError> {
        let seg = self.segments(t, p)?;
        Ok(accumulate(&seg, p.first * self.lower_tail[t], p.last * self.upper_tail[t]))
    }

    /// `E[f(X) | mean = targets[t]]` for every target.
    pub fn expect(&self, p: &PiecewisePoly<T>) -> Result<Vec<T>, QuadratureError> {
        self.check(p)?;
        let w = self.order + 1;
        let n = self.grid.len();
        Ok((0..self.targets.len())
            .map(|t| {
                let row = self.row(t);
                let mut s = p.first * self.lower_tail[t] + p.last * self.upper_tail[t];
                for j in 0..n - 1 {
                    s = s + dot(p.interval(j), &row[j * w..(j + 1) * w]);
                }
                s
            })
            .collect())
    }

    /// Fits `f` on the kernel grid and returns its expectation for every target.
    pub fn expect_values(&self, f: &[T]) -> Result<Vec<T>, QuadratureError> {
        self.expect(&PiecewisePoly::fit(&self.grid, f, self.order)?)
    }

    /// `E[max(f, g)]` for every target, splitting intervals at crossovers of `f - g`.
    pub fn expect_max(&self, f: &[T], g: &[T]) -> Result<Vec<T>, QuadratureError> {
        let pf = PiecewisePoly::fit(&self.grid, f, self.order)?;
        let pg = PiecewisePoly::fit(&self.grid, g, self.order)?;
        let plan = plan_max(&pf, &pg, f, g);
        let w = self.order + 1;
        let n = self.grid.len();
        let lo = f[0].max(g[0]);
        let hi = f[n - 1].max(g[n - 1]);
        let mut m = vec![T::zero(); w];
        let mut out = Vec::with_capacity(self.targets.len());
        for (t, &mu) in self.targets.iter().enumerate() {
            let row = self.row(t);
            let gm = GaussianMoments { mu, sigma: self.sigma };
            let mut s = lo * self.lower_tail[t] + hi * self.upper_tail[t];
            for (j, piece) in plan.iter().enumerate() {
                match *piece {
                    Piece::Whole { use_first } => {
                        let c = if use_first { pf.interval(j) } else { pg.interval(j) };
                        s = s + dot(c, &row[j * w..(j + 1) * w]);
                    }
                    Piece::Split { at, first_below } => {
                        let (below, above) =
                            if first_below { (pf.interval(j), pg.interval(j)) } else { (pg.interval(j), pf.interval(j)) };
                        gm.segment(self.grid[j], at, self.grid[j], &mut m);
                        s = s + dot(below, &m);
                        gm.segment(at, self.grid[j + 1], self.grid[j], &mut m);
                        s = s + dot(above, &m);
                    }
                }
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Crossover points of `f - g` on the grid, one per sign change.
    pub fn crossovers(&self, f: &[T], g: &[T]) -> Result<Vec<T>, QuadratureError> {
        let pf = PiecewisePoly::fit(&self.grid, f, self.order)?;
        let pg = PiecewisePoly::fit(&self.grid, g, self.order)?;
        Ok(plan_max(&pf, &pg, f, g)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Split { at, .. } => Some(at),
                Piece::Whole { .. } => None,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_reproduces_square() {
        let c = neville_coeffs::<f64>(&[-1.0, 0.5, 2.0], &[1.0, 0.25, 4.0]).unwrap();
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12 && (c[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neville_constant() {
        assert_eq!(neville_coeffs(&[3.0], &[7.5]).unwrap(), vec![7.5]);
    }

    #[test]
    fn neville_duplicate() {
        assert_eq!(neville_coeffs(&[1.0, 1.0], &[0.0, 1.0]), Err(QuadratureError::DuplicateAbscissae));
    }

    #[test]
    fn median_and_mean() {
        assert!((gaussian_partial_moment(0, 0.3, 0.3, 2.0).unwrap() - 0.5f64).abs() < 1e-15);
        let m = gaussian_partial_moment(1, 0.3 + 40.0 * 2.0, 0.3, 2.0).unwrap();
        assert!((m - 0.3f64).abs() < 1e-12);
    }

    #[test]
    fn stencil_clipping() {
        assert_eq!(stencil_start(0, 10, 3), 0);
        assert_eq!(stencil_start(5, 10, 3), 4);
        assert_eq!(stencil_start(8, 10, 3), 6);
        assert_eq!(stencil_start(3, 10, 2), 2);
    }

    #[test]
    fn kernel_matches_direct_integration() {
        let x: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
        let f: Vec<f64> = x.iter().map(|v| (0.3 * v).exp()).collect();
        let k = TransitionKernel::new(&x, &[-1.0, 0.0, 2.5], 0.8, 3).unwrap();
        let e = k.expect_values(&f).unwrap();
        let p = PiecewisePoly::fit(&x, &f, 3).unwrap();
        for (i, mu) in [-1.0, 0.0, 2.5].iter().enumerate() {
            let d = p.integrate(*mu, 0.8).unwrap();
            assert!((e[i] - d).abs() < 1e-13 * d.abs());
        }
    }
}
