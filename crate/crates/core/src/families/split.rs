use std::sync::Arc;

use crate::error::{Error, Result};
use crate::families::{Base, DirectFamily, LocationScaleFamily, Pin, SharedBase};
use crate::numerics::{integrate, Interval, Tolerance};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// The base restricted to one side of zero and renormalized.
struct OneSided<T: Real> {
    parent: SharedBase<T>,
    sign: Sign,
    mass: T,
    cdf0: T,
    label: String,
}

impl<T: Real> Base<T> for OneSided<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn pdf(&self, u: T) -> T {
        let inside = match self.sign {
            Sign::Plus => u > T::zero(),
            Sign::Minus => u < T::zero(),
        };
        if inside {
            self.parent.pdf(u) / self.mass
        } else {
            T::zero()
        }
    }

    fn cdf(&self, u: T) -> T {
        match self.sign {
            Sign::Plus if u <= T::zero() => T::zero(),
            Sign::Plus => ((self.parent.cdf(u) - self.cdf0) / self.mass).min(T::one()),
            Sign::Minus if u >= T::zero() => T::one(),
            Sign::Minus => (self.parent.cdf(u) / self.mass).min(T::one()),
        }
    }

    fn sf(&self, u: T) -> T {
        match self.sign {
            Sign::Plus if u <= T::zero() => T::one(),
            Sign::Plus => (self.parent.sf(u) / self.mass).min(T::one()),
            Sign::Minus if u >= T::zero() => T::zero(),
            Sign::Minus => ((self.cdf0 - self.parent.cdf(u)) / self.mass).max(T::zero()),
        }
    }

    fn support(&self) -> Interval<T> {
        let s = self.parent.support();
        match self.sign {
            Sign::Plus => Interval {
                lo: s.lo.max(T::zero()),
                hi: s.hi,
            },
            Sign::Minus => Interval {
                lo: s.lo,
                hi: s.hi.min(T::zero()),
            },
        }
    }
}

/// `φ = c₊ φ₊ + c₋ φ₋` with `φ±` normalized on their half-lines.
#[derive(Clone)]
pub struct SignedSplit<T: Real> {
    pub c_plus: T,
    pub c_minus: T,
    pub family_plus: Option<LocationScaleFamily<T>>,
    pub family_minus: Option<LocationScaleFamily<T>>,
}

impl<T: Real> SignedSplit<T> {
    pub fn side(&self, sign: Sign) -> (T, Option<&LocationScaleFamily<T>>) {
        match sign {
            Sign::Plus => (self.c_plus, self.family_plus.as_ref()),
            Sign::Minus => (self.c_minus, self.family_minus.as_ref()),
        }
    }
}

fn half_mass<T: Real>(base: &SharedBase<T>, half: Interval<T>) -> Result<T> {
    let s = base.support();
    let lo = half.lo.max(s.lo);
    let hi = half.hi.min(s.hi);
    if !(lo < hi) {
        return Ok(T::zero());
    }
    let tol = Tolerance::default().with_subdivisions(400);
    integrate(|u| base.pdf(u), Interval { lo, hi }, &tol)
}

/// Splits the base density at zero into the parts carried by `x > μ` and
/// `x < μ`.
pub fn signed_split<T: Real>(fam: &LocationScaleFamily<T>) -> Result<SignedSplit<T>> {
    let base = fam.base();
    let c_plus = half_mass(base, Interval::positive())?;
    let c_minus = half_mass(base, Interval::negative())?;
    let cdf0 = base.cdf(T::zero());
    let side = |sign: Sign, mass: T| {
        (mass > T::zero()).then(|| {
            let tag = if sign == Sign::Plus { "+" } else { "-" };
            let one_sided: SharedBase<T> = Arc::new(OneSided {
                parent: Arc::clone(base),
                sign,
                mass,
                cdf0,
                label: format!("{}{}", base.label(), tag),
            });
            fam.with_base(one_sided)
        })
    };
    Ok(SignedSplit {
        family_plus: side(Sign::Plus, c_plus),
        family_minus: side(Sign::Minus, c_minus),
        c_plus,
        c_minus,
    })
}

/// `φ̃±(z) = e^z φ±(±e^z)`: the law of `ln(±(x − μ)/σ)`.
struct Reduced<T: Real> {
    side: SharedBase<T>,
    sign: Sign,
    label: String,
}

impl<T: Real> Base<T> for Reduced<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn pdf(&self, z: T) -> T {
        let e = z.exp();
        let u = match self.sign {
            Sign::Plus => e,
            Sign::Minus => -e,
        };
        let p = self.side.pdf(u);
        if p == T::zero() {
            p
        } else {
            e * p
        }
    }

    fn ln_pdf(&self, z: T) -> T {
        let e = z.exp();
        let u = match self.sign {
            Sign::Plus => e,
            Sign::Minus => -e,
        };
        z + self.side.ln_pdf(u)
    }

    fn cdf(&self, z: T) -> T {
        let e = z.exp();
        match self.sign {
            Sign::Plus => self.side.cdf(e),
            Sign::Minus => self.side.sf(-e),
        }
    }

    fn sf(&self, z: T) -> T {
        let e = z.exp();
        match self.sign {
            Sign::Plus => self.side.sf(e),
            Sign::Minus => self.side.cdf(-e),
        }
    }
}

/// Reduces one side of a scale family to a location family in
/// `y = ln(±(x − μ))` with location `λ₁ = ln σ`.
pub fn reduce_scale_to_location<T: Real>(
    split: &SignedSplit<T>,
    sign: Sign,
) -> Result<DirectFamily<T>> {
    let (mass, fam) = split.side(sign);
    let fam = match fam {
        Some(f) if mass > T::zero() => f,
        _ => return Err(Error::EmptySide),
    };
    let tag = if sign == Sign::Plus { "+" } else { "-" };
    let base = fam.base();
    let reduced: SharedBase<T> = Arc::new(Reduced {
        side: Arc::clone(base),
        sign,
        label: format!("{}-reduced", base.label()),
    });
    let label = format!(
        "{}-reduced{}",
        base.label().trim_end_matches(['+', '-']),
        tag
    );
    Ok(DirectFamily::new(
        LocationScaleFamily::new(reduced, Pin::Scale(T::one())).with_label(label),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{transform_variable, Exponential, FnBase, MonotoneMap, Normal};

    fn ls(base: SharedBase<f64>) -> LocationScaleFamily<f64> {
        LocationScaleFamily::new(base, Pin::Location(0.0))
    }

    #[test]
    fn normal_splits_evenly() {
        let s = signed_split(&ls(Arc::new(Normal))).unwrap();
        assert!((s.c_plus - 0.5).abs() < 1e-12);
        assert!((s.c_minus - 0.5).abs() < 1e-12);
        assert!((s.c_plus + s.c_minus - 1.0).abs() < 1e-10);
        assert!(s.family_plus.is_some() && s.family_minus.is_some());
    }

    #[test]
    fn exponential_is_all_plus() {
        let s = signed_split(&ls(Arc::new(Exponential))).unwrap();
        assert!((s.c_plus - 1.0).abs() < 1e-12);
        assert_eq!(s.c_minus, 0.0);
        assert!(s.family_minus.is_none());
        assert!(matches!(
            reduce_scale_to_location(&s, Sign::Minus),
            Err(Error::EmptySide)
        ));
    }

    #[test]
    fn mirrored_exponential_is_all_minus() {
        let mirror: SharedBase<f64> = Arc::new(FnBase::new(
            "mirror-exponential",
            |u: f64| if u < 0.0 { u.exp() } else { 0.0 },
            |u: f64| if u < 0.0 { u.exp() } else { 1.0 },
            Interval::negative(),
        ));
        let s = signed_split(&ls(mirror)).unwrap();
        assert_eq!(s.c_plus, 0.0);
        assert!((s.c_minus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_exponential_density() {
        let s = signed_split(&ls(Arc::new(Exponential))).unwrap();
        let r = reduce_scale_to_location(&s, Sign::Plus).unwrap();
        // σ = 1 → λ₁ = 0
        assert!((r.pdf(0.0, &[0.0]) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((r.pdf(0.0, &[0.0]) - 0.36788).abs() < 1e-5);
        let c = 0.7;
        for y in [-1.0, 0.3, 2.0] {
            assert!((r.pdf(y, &[0.4]) - r.pdf(y + c, &[0.4 + c])).abs() < 1e-15);
        }
    }

    #[test]
    fn reduced_normal_sides_normalize() {
        let s = signed_split(&ls(Arc::new(Normal))).unwrap();
        let tol = Tolerance::default().with_subdivisions(400);
        for sign in [Sign::Plus, Sign::Minus] {
            let r = reduce_scale_to_location(&s, sign).unwrap();
            let m = integrate(|y| r.pdf(y, &[0.0]), Interval::real_line(), &tol).unwrap();
            assert!((m - 1.0).abs() < 1e-9, "{sign:?} {m}");
        }
    }

    #[test]
    fn reduction_round_trip_recovers_one_sided_pdf() {
        let s = signed_split(&ls(Arc::new(Normal))).unwrap();
        let plus = DirectFamily::new(s.family_plus.clone().unwrap());
        let r = reduce_scale_to_location(&s, Sign::Plus).unwrap();
        let back = transform_variable(&r, MonotoneMap::exp()).unwrap();
        for sigma in [0.3f64, 1.0, 4.0] {
            for x in [0.05, 0.5, 1.0, 3.0, 7.5] {
                let a = back.pdf(x, &[sigma.ln()]);
                let b = plus.pdf(x, &[sigma]);
                assert!((a - b).abs() < 1e-7, "σ={sigma} x={x}: {a} vs {b}");
            }
        }
    }
}
