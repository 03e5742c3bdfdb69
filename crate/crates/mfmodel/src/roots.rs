//! One-dimensional root finding and minimisation.

use thiserror::Error;

use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("root not bracketed: f({lo}) = {flo}, f({hi}) = {fhi}")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("non-finite function value at {0}")]
    NonFinite(f64),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
}

/// Brent's method on a bracketing interval. Stops when the bracket is narrower than `xtol`
/// or |f| drops below `ftol`.
pub fn brent<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    xtol: T,
    ftol: T,
    max_iter: usize,
) -> Result<T, RootError> {
    let two: T = lit(2.0);
    let half: T = lit(0.5);
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() {
        return Err(RootError::NonFinite(a.to_f64().unwrap_or(f64::NAN)));
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite(b.to_f64().unwrap_or(f64::NAN)));
    }
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(RootError::NotBracketed {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
            flo: fa.to_f64().unwrap_or(f64::NAN),
            fhi: fb.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = two * T::epsilon() * b.abs() + half * xtol;
        let m = half * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            let three: T = lit(3.0);
            if two * p < (three * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol { b + d } else if m > T::zero() { b + tol } else { b - tol };
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite(b.to_f64().unwrap_or(f64::NAN)));
        }
    }
    Err(RootError::NoConvergence(max_iter))
}

/// Plain bisection, used where the caller needs a guaranteed bracket width.
pub fn bisect<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, xtol: T, max_iter: usize) -> Result<T, RootError> {
    let half: T = lit(0.5);
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(RootError::NotBracketed {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
            flo: fa.to_f64().unwrap_or(f64::NAN),
            fhi: fb.to_f64().unwrap_or(f64::NAN),
        });
    }
    let a_positive = fa > T::zero();
    for _ in 0..max_iter {
        let mid = half * (a + b);
        if (b - a).abs() <= xtol || mid == a || mid == b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if (fm > T::zero()) == a_positive {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(half * (a + b))
}

/// Golden-section search for a minimum on [lo, hi].
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
