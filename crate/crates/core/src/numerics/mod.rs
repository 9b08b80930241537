//! Shared numerical kernel: quadrature on finite and improper domains,
//! bracketed root finding, grid construction, interpolation and seeded
//! random streams.

mod grid;
mod interp;
mod quadrature;
mod rng;
mod roots;

pub use grid::{build_grid, build_grid_with};
pub use interp::MonotoneCubic;
pub use quadrature::{
    gauss_legendre, integrate, integrate_with, local_scale, log_integrate_peaked, maximize,
    GaussLegendre, Hint, Peak,
};
pub use rng::RandomStream;
pub use roots::{expand_bracket, find_root};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// An open interval on the extended real line. Either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "interval requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn positive() -> Self {
        Self {
            lo: T::zero(),
            hi: T::infinity(),
        }
    }

    pub fn negative() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::zero(),
        }
    }

    pub fn unit() -> Self {
        Self {
            lo: T::zero(),
            hi: T::one(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Closed containment; infinite ends never contain a finite value.
    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi && x.is_finite()
    }

    pub fn interior(&self, x: T) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }
}

/// Accuracy targets for quadrature and root finding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance<T> {
    pub rel: T,
    pub abs: T,
    pub max_subdivisions: usize,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Self {
            rel: T::lit(1e-9),
            abs: T::lit(1e-12),
            max_subdivisions: 60,
        }
    }
}

impl<T: Real> Tolerance<T> {
    pub fn new(rel: T, abs: T, max_subdivisions: usize) -> Result<Self> {
        if !(rel > T::zero()) || !(abs > T::zero()) || max_subdivisions == 0 {
            return Err(Error::InvalidArgument(
                "tolerances must be positive".to_string(),
            ));
        }
        Ok(Self {
            rel,
            abs,
            max_subdivisions,
        })
    }

    pub fn with_subdivisions(mut self, max_subdivisions: usize) -> Self {
        self.max_subdivisions = max_subdivisions;
        self
    }

    pub fn with_rel(mut self, rel: T) -> Self {
        self.rel = rel;
        self
    }

    pub fn with_abs(mut self, abs: T) -> Self {
        self.abs = abs;
        self
    }
}

/// Central finite difference with the step rule `cbrt(eps) * max(1, |x|)`.
pub fn central_diff<T: Real>(f: impl Fn(T) -> T, x: T) -> T {
    let h = x.diff_step();
    (f(x + h) - f(x - h)) / (h + h)
}

/// Forward and backward one-sided differences, same step rule.
pub fn one_sided_diffs<T: Real>(f: impl Fn(T) -> T, x: T) -> (T, T) {
    let h = x.diff_step();
    let f0 = f(x);
    ((f0 - f(x - h)) / h, (f(x + h) - f0) / h)
}
