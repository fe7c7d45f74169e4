//! Scalar root finding on a bracket.

use crate::error::{Error, Result};

/// Newton's method kept inside a shrinking sign-change bracket, with a
/// bisection step whenever the Newton step leaves it.
///
/// `f` returns the value and derivative. Stops when `|f| <= tol` or the
/// bracket is below a few ulps.
pub fn safeguarded_newton<F>(f: F, lo: f64, hi: f64, guess: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Argument(format!("root not bracketed on [{a}, {b}]")));
    }
    let neg_at_a = fa < 0.0;
    let mut x = if guess > a && guess < b { guess } else { 0.5 * (a + b) };
    let mut best = (f64::INFINITY, x);
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if (fx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            return Ok(best.1);
        }
        let step = x - fx / dfx;
        x = if dfx != 0.0 && step > a && step < b { step } else { 0.5 * (a + b) };
    }
    Ok(best.1)
}
