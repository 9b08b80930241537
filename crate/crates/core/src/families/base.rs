//! Standardized base distributions φ/Φ for location-scale families.

use std::sync::Arc;

use crate::error::Result;
use crate::numerics::{expand_bracket, find_root, Interval, Tolerance};
use crate::scalar::Real;

/// A standardized distribution on the real line: density `φ`, cdf `Φ`.
pub trait Base<T: Real>: Send + Sync {
    fn label(&self) -> &str;
    fn pdf(&self, u: T) -> T;
    fn cdf(&self, u: T) -> T;

    /// `1 - Φ(u)`, overridden where a more accurate form exists.
    fn sf(&self, u: T) -> T {
        T::one() - self.cdf(u)
    }

    fn ln_pdf(&self, u: T) -> T {
        self.pdf(u).ln()
    }

    fn support(&self) -> Interval<T> {
        Interval::real_line()
    }

    /// Inverse of `Φ` by root finding.
    fn quantile(&self, p: T) -> Result<T> {
        let support = self.support();
        if p <= T::zero() {
            return Ok(support.lo);
        }
        if p >= T::one() {
            return Ok(support.hi);
        }
        let start = if support.lo.is_finite() {
            support.lo + T::one()
        } else if support.hi.is_finite() {
            support.hi - T::one()
        } else {
            T::zero()
        };
        let g = |u: T| self.cdf(u) - p;
        let bracket = expand_bracket(g, start, T::one(), support)?;
        let tol = Tolerance::default()
            .with_rel(T::lit(4.0) * T::epsilon())
            .with_abs(T::min_positive_value());
        find_root(g, bracket, &tol)
    }
}

pub type SharedBase<T> = Arc<dyn Base<T>>;

#[derive(Debug, Clone, Copy, Default)]
pub struct Normal;

impl<T: Real> Base<T> for Normal {
    fn label(&self) -> &str {
        "normal"
    }

    fn pdf(&self, u: T) -> T {
        (-(u * u) * T::lit(0.5)).exp() / (T::TAU()).sqrt()
    }

    fn ln_pdf(&self, u: T) -> T {
        -(u * u) * T::lit(0.5) - T::TAU().sqrt().ln()
    }

    fn cdf(&self, u: T) -> T {
        T::lit(0.5) * (-u / T::SQRT_2()).erfc()
    }

    fn sf(&self, u: T) -> T {
        T::lit(0.5) * (u / T::SQRT_2()).erfc()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Cauchy;

impl<T: Real> Base<T> for Cauchy {
    fn label(&self) -> &str {
        "cauchy"
    }

    fn pdf(&self, u: T) -> T {
        T::FRAC_1_PI() / (T::one() + u * u)
    }

    fn cdf(&self, u: T) -> T {
        if u < T::lit(-1.0) {
            // atan(u) + π/2 = -atan(1/u) for u < 0, avoids cancellation
            -(T::one() / u).atan() * T::FRAC_1_PI()
        } else {
            T::lit(0.5) + u.atan() * T::FRAC_1_PI()
        }
    }

    fn sf(&self, u: T) -> T {
        self.cdf(-u)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

impl<T: Real> Base<T> for Logistic {
    fn label(&self) -> &str {
        "logistic"
    }

    fn pdf(&self, u: T) -> T {
        let e = (-u.abs()).exp();
        e / ((T::one() + e) * (T::one() + e))
    }

    fn ln_pdf(&self, u: T) -> T {
        let a = u.abs();
        -a - T::lit(2.0) * (-a).exp().ln_1p()
    }

    fn cdf(&self, u: T) -> T {
        if u >= T::zero() {
            T::one() / (T::one() + (-u).exp())
        } else {
            let e = u.exp();
            e / (T::one() + e)
        }
    }

    fn sf(&self, u: T) -> T {
        self.cdf(-u)
    }
}

/// Standard exponential, one-sided on `u > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exponential;

impl<T: Real> Base<T> for Exponential {
    fn label(&self) -> &str {
        "exponential"
    }

    fn pdf(&self, u: T) -> T {
        if u < T::zero() {
            T::zero()
        } else {
            (-u).exp()
        }
    }

    fn ln_pdf(&self, u: T) -> T {
        if u < T::zero() {
            T::neg_infinity()
        } else {
            -u
        }
    }

    fn cdf(&self, u: T) -> T {
        if u <= T::zero() {
            T::zero()
        } else {
            -(-u).exp_m1()
        }
    }

    fn sf(&self, u: T) -> T {
        if u <= T::zero() {
            T::one()
        } else {
            (-u).exp()
        }
    }

    fn support(&self) -> Interval<T> {
        Interval::positive()
    }
}

type Scalar1<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A base given directly by closures.
#[derive(Clone)]
pub struct FnBase<T> {
    label: String,
    pdf: Scalar1<T>,
    cdf: Scalar1<T>,
    support: Interval<T>,
}

impl<T: Real> FnBase<T> {
    pub fn new(
        label: impl Into<String>,
        pdf: impl Fn(T) -> T + Send + Sync + 'static,
        cdf: impl Fn(T) -> T + Send + Sync + 'static,
        support: Interval<T>,
    ) -> Self {
        Self {
            label: label.into(),
            pdf: Arc::new(pdf),
            cdf: Arc::new(cdf),
            support,
        }
    }
}

impl<T: Real> Base<T> for FnBase<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn pdf(&self, u: T) -> T {
        (self.pdf)(u)
    }

    fn cdf(&self, u: T) -> T {
        (self.cdf)(u)
    }

    fn support(&self) -> Interval<T> {
        self.support
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_diff, integrate};

    fn bases() -> Vec<Box<dyn Base<f64>>> {
        vec![
            Box::new(Normal),
            Box::new(Cauchy),
            Box::new(Logistic),
            Box::new(Exponential),
        ]
    }

    #[test]
    fn bases_normalize_and_cdf_differentiates_to_pdf() {
        for b in bases() {
            let tol = Tolerance::default().with_subdivisions(400);
            let m = integrate(|u| b.pdf(u), b.support(), &tol).unwrap();
            assert!((m - 1.0).abs() < 1e-8, "{} mass {m}", b.label());
            for u in [-2.5, -0.3, 0.4, 1.7, 6.0] {
                if !b.support().interior(u) {
                    continue;
                }
                // differentiate whichever tail is small to avoid cancellation
                let d = if u > 0.0 {
                    -central_diff(|v| b.sf(v), u)
                } else {
                    central_diff(|v| b.cdf(v), u)
                };
                assert!(
                    (d - b.pdf(u)).abs() <= 1e-6 * b.pdf(u),
                    "{} at {u}",
                    b.label()
                );
                assert!((b.ln_pdf(u) - b.pdf(u).ln()).abs() < 1e-12);
                assert!((b.sf(u) + b.cdf(u) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for b in bases() {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let u = b.quantile(p).unwrap();
                assert!((b.cdf(u) - p).abs() < 1e-12, "{} p={p}", b.label());
            }
        }
        let n: &dyn Base<f64> = &Normal;
        assert!((n.quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
    }
}
