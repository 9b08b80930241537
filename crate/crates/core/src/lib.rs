//! Inverse probability distributions for invariant families of direct
//! distributions: consistency factors, posteriors, calibration checks and
//! comparisons with rival prior rules.
//!
//! The numerical core, families and group actions are generic over
//! [`Real`]; the aliases below fix the scalar to `f64`.

// `!(a < b)` is deliberate: it also rejects NaN.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::needless_range_loop
)]

pub mod calibration;
pub mod error;
pub mod families;
pub mod invariance;
pub mod numerics;
pub mod posterior;
pub mod rivals;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Family = families::DirectFamily<f64>;
pub type Group = invariance::GroupAction<f64>;
pub type Reduction = invariance::ReductionMaps<f64>;
pub type Map = families::MonotoneMap<f64>;
pub type Domain = numerics::Interval<f64>;
pub type Tol = numerics::Tolerance<f64>;
