//! Experiment runner: JSON configs in, JSON/CSV/SVG results out.

// `!(a < b)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod config;
pub mod factors;
pub mod plot;
pub mod run;

pub use config::{validate, validate_with, ExperimentConfig, FieldError, Overrides};
pub use run::{run, RunError, RunManifest};
