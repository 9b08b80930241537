use std::sync::Arc;

use crate::error::Result;
use crate::families::{Family, SharedBase};
use crate::invariance::GroupAction;
use crate::numerics::Interval;
use crate::scalar::Real;

/// Which of `(μ, σ)` is held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pin<T> {
    /// Both free, θ = (μ, σ).
    Joint,
    /// σ fixed at the given value, θ = (μ).
    Scale(T),
    /// μ fixed at the given value, θ = (σ).
    Location(T),
}

/// `F(x | μ, σ) = Φ((x - μ) / σ)`.
#[derive(Clone)]
pub struct LocationScaleFamily<T: Real> {
    base: SharedBase<T>,
    pin: Pin<T>,
    label: String,
}

impl<T: Real> LocationScaleFamily<T> {
    pub fn new(base: SharedBase<T>, pin: Pin<T>) -> Self {
        let label = match pin {
            Pin::Joint => base.label().to_string(),
            Pin::Scale(_) => format!("{}-location", base.label()),
            Pin::Location(_) => format!("{}-scale", base.label()),
        };
        Self { base, pin, label }
    }

    pub fn joint(base: SharedBase<T>) -> Self {
        Self::new(base, Pin::Joint)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn base(&self) -> &SharedBase<T> {
        &self.base
    }

    pub fn pin(&self) -> Pin<T> {
        self.pin
    }

    /// Same pin and label scheme over another base.
    pub fn with_base(&self, base: SharedBase<T>) -> Self {
        Self::new(base, self.pin)
    }

    /// Same base with a different pin, e.g. the μ-pinned scale sub-family.
    pub fn repinned(&self, pin: Pin<T>) -> Self {
        Self::new(Arc::clone(&self.base), pin)
    }

    #[inline]
    pub fn mu_sigma(&self, theta: &[T]) -> (T, T) {
        match self.pin {
            Pin::Joint => (theta[0], theta[1]),
            Pin::Scale(s) => (theta[0], s),
            Pin::Location(m) => (m, theta[0]),
        }
    }
}

impl<T: Real> Family<T> for LocationScaleFamily<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn param_space(&self) -> Vec<Interval<T>> {
        match self.pin {
            Pin::Joint => vec![Interval::real_line(), Interval::positive()],
            Pin::Scale(_) => vec![Interval::real_line()],
            Pin::Location(_) => vec![Interval::positive()],
        }
    }

    fn support(&self, theta: &[T]) -> Interval<T> {
        let (mu, sigma) = self.mu_sigma(theta);
        let s = self.base.support();
        Interval {
            lo: mu + sigma * s.lo,
            hi: mu + sigma * s.hi,
        }
    }

    fn pdf(&self, x: T, theta: &[T]) -> T {
        let (mu, sigma) = self.mu_sigma(theta);
        self.base.pdf((x - mu) / sigma) / sigma
    }

    fn ln_pdf(&self, x: T, theta: &[T]) -> T {
        let (mu, sigma) = self.mu_sigma(theta);
        self.base.ln_pdf((x - mu) / sigma) - sigma.ln()
    }

    fn cdf(&self, x: T, theta: &[T]) -> T {
        let (mu, sigma) = self.mu_sigma(theta);
        self.base.cdf((x - mu) / sigma)
    }

    fn sf(&self, x: T, theta: &[T]) -> T {
        let (mu, sigma) = self.mu_sigma(theta);
        self.base.sf((x - mu) / sigma)
    }

    fn quantile(&self, p: T, theta: &[T]) -> Result<T> {
        let (mu, sigma) = self.mu_sigma(theta);
        Ok(mu + sigma * self.base.quantile(p)?)
    }

    fn reference_theta(&self) -> Vec<T> {
        match self.pin {
            Pin::Joint => vec![T::zero(), T::one()],
            Pin::Scale(_) => vec![T::zero()],
            Pin::Location(_) => vec![T::one()],
        }
    }

    fn group(&self) -> Option<GroupAction<T>> {
        Some(match self.pin {
            Pin::Joint => GroupAction::affine(),
            Pin::Scale(_) => GroupAction::translation(),
            Pin::Location(mu) => GroupAction::scaling_about(mu),
        })
    }

    fn as_location_scale(&self) -> Option<&LocationScaleFamily<T>> {
        Some(self)
    }
}
