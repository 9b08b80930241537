//! Floating point scalar abstraction shared by the numerical kernel,
//! the family definitions and the group actions.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Converts an `f64` literal. Panics only if the literal is not
    /// representable, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Step for central finite differences: cbrt(eps) * max(1, |x|).
    #[inline]
    fn diff_step(self) -> Self {
        Self::epsilon().cbrt() * Self::one().max(self.abs())
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_matches_known_values() {
        assert!((Real::erfc(0.0f64) - 1.0).abs() < 1e-16);
        assert!((Real::erfc(1.0f64) - 0.157_299_207_050_285_13).abs() < 1e-15);
        assert!((Real::erfc(1.0f32) - 0.157_299_2).abs() < 1e-6);
    }

    #[test]
    fn diff_step_scales_with_magnitude() {
        let h1 = 0.5f64.diff_step();
        let h2 = 1000.0f64.diff_step();
        assert!((h2 / h1 - 1000.0).abs() < 1e-9);
    }
}
