use crate::error::{Error, Result};
use crate::numerics::{Interval, Tolerance};
use crate::scalar::Real;

/// Bracketed root finding: Illinois-modified regula falsi, falling back
/// to bisection whenever the bracket fails to halve in two steps.
///
/// Stops when `|g(x)| <= tol.abs` or the bracket width is at most
/// `tol.rel * |x|`.
pub fn find_root<T: Real>(
    g: impl Fn(T) -> T,
    bracket: Interval<T>,
    tol: &Tolerance<T>,
) -> Result<T> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    if !bracket.is_finite() {
        return Err(Error::InvalidArgument(
            "root bracket must be finite".to_string(),
        ));
    }
    let mut fa = g(a);
    let mut fb = g(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo: a.as_f64(),
            hi: b.as_f64(),
        });
    }
    let half = T::lit(0.5);
    let mut side = 0i8;
    let mut width = b - a;
    for iter in 0..400 {
        let secant = (a * fb - b * fa) / (fb - fa);
        let mut x = if iter % 3 == 2 || !(secant > a && secant < b) {
            half * (a + b)
        } else {
            secant
        };
        if !(x > a && x < b) {
            x = half * (a + b);
            if !(x > a && x < b) {
                return Ok(if fa.abs() < fb.abs() { a } else { b });
            }
        }
        let fx = g(x);
        if fx.abs() <= tol.abs || fx == T::zero() {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb = fb * half;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa = fa * half;
            }
            side = 1;
        }
        let w = b - a;
        if w <= tol.rel * x.abs() {
            return Ok(half * (a + b));
        }
        if iter % 2 == 1 {
            if w > half * width {
                // force a bisection next round
                let m = half * (a + b);
                let fm = g(m);
                if fm.abs() <= tol.abs || fm == T::zero() {
                    return Ok(m);
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                    fb = fm;
                }
                side = 0;
            }
            width = b - a;
        }
    }
    Ok(half * (a + b))
}

/// Grows a bracket outwards from `start` in steps of `step * 2^k`, staying
/// inside `domain`, until `g` changes sign.
pub fn expand_bracket<T: Real>(
    g: impl Fn(T) -> T,
    start: T,
    step: T,
    domain: Interval<T>,
) -> Result<Interval<T>> {
    let half = T::lit(0.5);
    let g0 = g(start);
    if g0 == T::zero() {
        let eps = step.abs().max(T::epsilon()) * T::lit(1e-9);
        return Interval::new(start - eps, start + eps);
    }
    let mut d = step;
    let (mut left, mut right) = (start, start);
    for _ in 0..1100 {
        let mut l = left - d;
        if l <= domain.lo {
            l = half * (left + domain.lo);
        }
        let mut r = right + d;
        if r >= domain.hi {
            r = half * (right + domain.hi);
        }
        let gl = g(l);
        if gl.signum() != g0.signum() && !gl.is_nan() {
            return Interval::new(l, left);
        }
        let gr = g(r);
        if gr.signum() != g0.signum() && !gr.is_nan() {
            return Interval::new(right, r);
        }
        left = l;
        right = r;
        d = d * T::lit(2.0);
    }
    Err(Error::NoSignChange {
        lo: left.as_f64(),
        hi: right.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance<f64> {
        Tolerance::default()
    }

    #[test]
    fn linear_root() {
        let x = find_root(|x: f64| x - 2.0, Interval::new(0.0, 5.0).unwrap(), &tol()).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_cdf_quantiles() {
        let b = Interval::new(0.01, 100.0).unwrap();
        let t = tol().with_abs(1e-15);
        let lo = find_root(|s: f64| (-1.0 / s).exp() - 0.05, b, &t).unwrap();
        let hi = find_root(|s: f64| (-1.0 / s).exp() - 0.95, b, &t).unwrap();
        assert!((lo - (-1.0 / 0.05f64.ln())).abs() < 1e-9);
        assert!((hi - (-1.0 / 0.95f64.ln())).abs() < 1e-7);
        assert!((lo - 0.33381).abs() < 1e-5);
        assert!((hi - 19.4957).abs() < 1e-4);
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        let r = find_root(
            |x: f64| x * x + 1.0,
            Interval::new(-1.0, 1.0).unwrap(),
            &tol(),
        );
        assert!(matches!(r, Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn expand_finds_far_root() {
        let g = |x: f64| x - 1e6;
        let b = expand_bracket(g, 0.0, 1.0, Interval::real_line()).unwrap();
        assert!(b.lo <= 1e6 && b.hi >= 1e6);
        let b = expand_bracket(|x: f64| x - 1e-9, 1.0, 0.5, Interval::positive()).unwrap();
        assert!(b.lo <= 1e-9 && b.hi >= 1e-9);
    }
}
