use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::families::{DirectFamily, Family};
use crate::invariance::GroupAction;
use crate::numerics::{build_grid, central_diff, Interval, Tolerance};
use crate::scalar::Real;

type Fn1<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A strictly monotone map with its inverse.
#[derive(Clone)]
pub struct MonotoneMap<T> {
    label: String,
    forward: Fn1<T>,
    inverse: Fn1<T>,
    derivative: Option<Fn1<T>>,
    increasing: bool,
}

impl<T: Real> fmt::Debug for MonotoneMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneMap")
            .field("label", &self.label)
            .field("increasing", &self.increasing)
            .finish()
    }
}

impl<T: Real> MonotoneMap<T> {
    pub fn new(
        label: impl Into<String>,
        increasing: bool,
        forward: impl Fn(T) -> T + Send + Sync + 'static,
        inverse: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            derivative: None,
            increasing,
        }
    }

    /// Supplies the exact derivative of the forward map.
    pub fn with_derivative(mut self, d: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn identity() -> Self {
        Self::new("identity", true, |x| x, |y| y).with_derivative(|_| T::one())
    }

    /// `x ↦ a·x + b`, `a ≠ 0`.
    pub fn affine(a: T, b: T) -> Self {
        Self::new(
            format!("affine({a},{b})"),
            a > T::zero(),
            move |x| a * x + b,
            move |y| (y - b) / a,
        )
        .with_derivative(move |_| a)
    }

    pub fn ln() -> Self {
        Self::new("ln", true, |x: T| x.ln(), |y: T| y.exp()).with_derivative(|x: T| x.recip())
    }

    pub fn exp() -> Self {
        Self::new("exp", true, |x: T| x.exp(), |y: T| y.ln()).with_derivative(|x: T| x.exp())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    pub fn apply(&self, x: T) -> T {
        (self.forward)(x)
    }

    pub fn invert(&self, y: T) -> T {
        (self.inverse)(y)
    }

    pub fn derivative(&self, x: T) -> T {
        match &self.derivative {
            Some(d) => d(x),
            None => central_diff(|v| (self.forward)(v), x),
        }
    }

    /// `(s⁻¹)′(y)`.
    pub fn inverse_derivative(&self, y: T) -> T {
        match &self.derivative {
            Some(d) => d((self.inverse)(y)).recip(),
            None => central_diff(|v| (self.inverse)(v), y),
        }
    }

    /// Image of an interval; infinite ends map to the limits of the map.
    pub fn image(&self, domain: &Interval<T>) -> Interval<T> {
        let end = |x: T, toward_hi: bool| {
            let y = self.apply(x);
            if y.is_nan() {
                if toward_hi == self.increasing {
                    T::infinity()
                } else {
                    T::neg_infinity()
                }
            } else {
                y
            }
        };
        let a = end(domain.lo, false);
        let b = end(domain.hi, true);
        if a < b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }
}

/// The family of `Y = s(X)`.
struct Transformed<T: Real> {
    inner: DirectFamily<T>,
    map: MonotoneMap<T>,
    label: String,
}

impl<T: Real> Family<T> for Transformed<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn param_space(&self) -> Vec<Interval<T>> {
        self.inner.param_space()
    }

    fn support(&self, theta: &[T]) -> Interval<T> {
        self.map.image(&self.inner.support(theta))
    }

    fn pdf(&self, y: T, theta: &[T]) -> T {
        let x = self.map.invert(y);
        if x.is_nan() {
            return T::zero();
        }
        let p = self.inner.pdf(x, theta);
        if p == T::zero() {
            return p;
        }
        p * self.map.inverse_derivative(y).abs()
    }

    fn cdf(&self, y: T, theta: &[T]) -> T {
        let x = self.map.invert(y);
        if self.map.is_increasing() {
            self.inner.cdf(x, theta)
        } else {
            self.inner.sf(x, theta)
        }
    }

    fn sf(&self, y: T, theta: &[T]) -> T {
        let x = self.map.invert(y);
        if self.map.is_increasing() {
            self.inner.sf(x, theta)
        } else {
            self.inner.cdf(x, theta)
        }
    }

    fn quantile(&self, p: T, theta: &[T]) -> Result<T> {
        let q = if self.map.is_increasing() {
            p
        } else {
            T::one() - p
        };
        Ok(self.map.apply(self.inner.quantile(q, theta)?))
    }

    fn reference_theta(&self) -> Vec<T> {
        self.inner.reference_theta()
    }

    fn group(&self) -> Option<GroupAction<T>> {
        self.inner.group().map(|g| g.conjugate(self.map.clone()))
    }
}

/// Distribution of `Y = s(X)`: `f_Y(y) = f_X(s⁻¹(y)) |(s⁻¹)′(y)|`, with
/// the cdf branch chosen by the orientation of `s`.
pub fn transform_variable<T: Real>(
    fam: &DirectFamily<T>,
    map: MonotoneMap<T>,
) -> Result<DirectFamily<T>> {
    let tol = Tolerance::<T>::default();
    let theta = fam.reference_theta();
    for x in build_grid(fam.support(&theta), 64, None) {
        if !x.is_finite() {
            continue;
        }
        let d = map.derivative(x);
        if !(d.abs() >= tol.abs) {
            return Err(Error::DerivativeVanishes { at: x.as_f64() });
        }
    }
    let label = format!("{}∘{}", map.label(), fam.label());
    Ok(DirectFamily::new(Transformed {
        inner: fam.clone(),
        map,
        label,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::lookup;
    use crate::numerics::integrate;

    #[test]
    fn identity_leaves_pdf_unchanged() {
        let n = lookup::<f64>("normal").unwrap();
        let t = transform_variable(&n, MonotoneMap::identity()).unwrap();
        for x in [-1.0, 0.0, 2.0] {
            assert_eq!(t.pdf(x, &[0.0, 1.0]), n.pdf(x, &[0.0, 1.0]));
        }
    }

    #[test]
    fn affine_map_of_standard_normal() {
        let n = lookup::<f64>("normal").unwrap();
        let t = transform_variable(&n, MonotoneMap::affine(2.0, 1.0)).unwrap();
        let theta = [0.0, 1.0];
        assert!((t.cdf(1.0, &theta) - 0.5).abs() < 1e-15);
        for y in [-3.0, -0.2, 1.0, 2.5] {
            assert!((t.cdf(y, &theta) - n.cdf((y - 1.0) / 2.0, &theta)).abs() < 1e-15);
        }
    }

    #[test]
    fn decreasing_map_flips_cdf() {
        let n = lookup::<f64>("normal").unwrap();
        let t = transform_variable(&n, MonotoneMap::affine(-1.0, 0.0)).unwrap();
        let theta = [1.0, 1.0];
        assert!((t.cdf(-1.0, &theta) - 0.5).abs() < 1e-15);
        assert!((t.quantile(0.5, &theta).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_of_exponential_scale() {
        let e = lookup::<f64>("exponential-scale").unwrap();
        let t = transform_variable(&e, MonotoneMap::ln()).unwrap();
        for y in [-2.0f64, 0.0, 1.3] {
            let expect = (y - y.exp()).exp();
            assert!((t.pdf(y, &[1.0]) - expect).abs() < 1e-15);
        }
        let tol = Tolerance::default().with_subdivisions(200);
        let m = integrate(|y| t.pdf(y, &[1.0]), t.support(&[1.0]), &tol).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vanishing_derivative_is_rejected() {
        let n = lookup::<f64>("normal").unwrap();
        let flat = MonotoneMap::new("flat", true, |x: f64| x, |y: f64| y).with_derivative(|_| 0.0);
        assert!(matches!(
            transform_variable(&n, flat),
            Err(Error::DerivativeVanishes { .. })
        ));
    }
}
