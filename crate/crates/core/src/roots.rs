//! Bracketed root finding for monotone scalar functions.

use crate::error::{Error, Result};

/// Absolute tolerance on the abscissa used by the reservoir solvers.
pub const X_TOL: f64 = 1e-12;

/// Finds the root of `f` inside `[lo, hi]`, where `f(lo)` and `f(hi)` have
/// opposite signs.
///
/// Regula falsi with the Illinois modification, falling back to a bisection
/// step whenever the secant step fails to shrink the bracket by half.
pub fn find_root<F>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numeric(format!(
            "root not bracketed: f({lo}) = {f_lo:e}, f({hi}) = {f_hi:e}"
        )));
    }
    // which endpoint was retained on the previous step (-1 lo, +1 hi)
    let mut retained = 0i8;
    for _ in 0..500 {
        let width = hi - lo;
        if width.abs() <= x_tol {
            break;
        }
        let mut x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !x.is_finite() || x <= lo.min(hi) || x >= lo.max(hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        let prev_width = width.abs();
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if retained == 1 {
                f_hi *= 0.5;
            }
            retained = 1;
        } else {
            hi = x;
            f_hi = fx;
            if retained == -1 {
                f_lo *= 0.5;
            }
            retained = -1;
        }
        if (hi - lo).abs() > 0.5 * prev_width {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if fm.signum() == f_lo.signum() {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
                f_hi = fm;
            }
            retained = 0;
        }
    }
    // return the endpoint with the smaller residual
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = find_root(|x| Ok(x * x * x - 2.0), 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn steep_exponential() {
        let r = find_root(|x| Ok(x.exp() - 1e6), -50.0, 50.0, 1e-13).unwrap();
        assert!((r - 1e6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unbracketed_is_an_error() {
        assert!(find_root(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn decreasing_function() {
        let r = find_root(|x| Ok(1.0 - x), -3.0, 7.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }
}
