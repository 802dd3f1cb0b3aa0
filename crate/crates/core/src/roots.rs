//! Bracketed scalar root finding (Brent's method).

use crate::error::{require_positive, Error, Result};

fn eval(f: &mut impl FnMut(f64) -> f64, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_nan() {
        Err(Error::NonFiniteEvaluation { x })
    } else {
        Ok(y)
    }
}

/// Finds a root of `f` in `[lo, hi]` to within a bracket width of `tol`.
///
/// Requires `f(lo)` and `f(hi)` of opposite sign (an endpoint that is an
/// exact zero is returned as is). Inverse quadratic / secant steps are
/// accepted only while they shrink the bracket fast enough; otherwise the
/// step falls back to bisection.
pub fn find_root(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    require_positive("tol", tol)?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParameter {
            name: "bracket",
            value: hi - lo,
            reason: "need finite lo < hi",
        });
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (eval(&mut f, a)?, eval(&mut f, b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if fb.signum() == fc.signum() {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = eval(&mut f, b)?;
    }
    // Brent needs at most ~log2(width/tol)^2 steps; reaching here means the
    // bracket could not shrink below tol in floating point.
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn sqrt_two() {
        let x = find_root(|x| x * x - 2.0, 1.0, 2.0, 1e-14).unwrap();
        assert_abs_diff_eq!(x, std::f64::consts::SQRT_2, epsilon = 1e-13);
    }

    #[test]
    fn linear_through_origin() {
        let x = find_root(|x| x, -1.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn first_nontrivial_tan_fixed_point() {
        // Oracle: plain bisection run until the bracket no longer shrinks.
        let f = |x: f64| x.tan() - x;
        let (mut lo, mut hi) = (PI + 0.01, 1.5 * PI - 0.01);
        for _ in 0..1_000_000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert_abs_diff_eq!(oracle, 4.493409457909064, epsilon = 1e-12);
        let x = find_root(f, PI + 0.01, 1.5 * PI - 0.01, 1e-13).unwrap();
        assert_abs_diff_eq!(x, oracle, epsilon = 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NoSignChange { .. })
        ));
        assert!(matches!(
            find_root(
                |x| if x > 0.3 { f64::NAN } else { x - 0.5 },
                0.0,
                1.0,
                1e-12
            ),
            Err(Error::NonFiniteEvaluation { .. })
        ));
        assert!(find_root(|x| x, 1.0, -1.0, 1e-12).is_err());
        assert!(find_root(|x| x, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| x.exp() - 3.0;
        let a = find_root(f, 0.0, 2.0, 1e-12).unwrap();
        let b = find_root(f, 0.0, 2.0, 1e-12).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
