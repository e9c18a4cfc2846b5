use super::Interval;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;

/// Brent's method on a bracketing interval, for a fallible function.
///
/// Returns an endpoint directly when the function vanishes there. The result
/// is within `tol` (plus a few ulps) of a sign change of `f`.
pub fn try_find_root<F>(mut f: F, iv: Interval, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut a = iv.lo;
    let mut b = iv.hi;
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !fa.is_finite() || !fb.is_finite() || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..MAX_ITERATIONS {
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
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
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
        fb = f(b)?;
        if !fb.is_finite() {
            return Err(Error::IllConditioned(format!(
                "root function is not finite at {b:e}"
            )));
        }
    }
    Err(Error::IterationCap {
        what: "brent root finder",
        iterations: MAX_ITERATIONS,
    })
}

/// Brent's method for an infallible function.
pub fn find_root<F>(mut f: F, iv: Interval, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    try_find_root(|x| Ok(f(x)), iv, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_root_of_two() {
        let x = find_root(|x| x * x - 2.0, Interval::new(0.0, 2.0).unwrap(), 1e-14).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn top_of_unit_euclidean_heatball() {
        // −(n/2) log(4πτ) + n log r = 0 with r = 1.
        let x = find_root(
            |t| -(4.0 * PI * t).ln(),
            Interval::new(1e-3, 1.0).unwrap(),
            1e-15,
        )
        .unwrap();
        assert!((x - 1.0 / (4.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn root_at_zero() {
        let x = find_root(|x| x, Interval::new(-1.0, 1.0).unwrap(), 1e-12).unwrap();
        assert!(x.abs() <= 1e-12);
    }

    #[test]
    fn no_sign_change() {
        let err = find_root(|x| x * x + 1.0, Interval::new(-1.0, 1.0).unwrap(), 1e-12).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }
}
