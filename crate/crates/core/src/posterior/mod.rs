//! Consistency factors, inverse probability distributions and their
//! updating, reparameterization and decomposition.

mod build;
mod density;
mod factor;
mod two_d;

pub use build::{
    build_posterior, check_factor, predictive_density, probe_elements, sequential_update,
    transform_posterior, FactorMode, Predictive,
};
pub use density::{Coordinate, Posterior, PosteriorOptions, PosteriorRecord, Provenance};
pub use factor::{
    consistency_factor, factor_functional_residual, transform_factor, ConsistencyFactor, FactorKind,
};
pub use two_d::{
    build_posterior_2d, conditional_from_joint, marginalize, product_rule_residual, Component,
    Posterior2D, Posterior2DRecord, GRID_SIDE,
};
