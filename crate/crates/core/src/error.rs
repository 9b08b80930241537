use thiserror::Error;

/// Errors raised by the inference library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    NonConvergence {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
    #[error("bracket [{lo}, {hi}] does not contain a sign change")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("map derivative vanishes at {at}")]
    DerivativeVanishes { at: f64 },
    #[error("side has zero probability mass")]
    EmptySide,
    #[error(
        "action is not differentiable at the identity (one-sided derivatives {left} and {right})"
    )]
    NonDifferentiable { left: f64, right: f64 },
    #[error("integration path from {from} to {to} crosses the trivial-action locus")]
    TrivialLocusCrossed { from: f64, to: f64 },
    #[error("posterior is not normalizable: {reason}")]
    PosteriorNotNormalizable { reason: String },
    #[error("datum {datum} lies on the trivial-action locus of the family's group")]
    TrivialLocusDatum { datum: f64 },
    #[error("marginal density {value:e} at the fixed value is below tolerance")]
    ZeroMarginal { value: f64 },
    #[error("direct cdf is not strictly monotone in the parameter near {at}")]
    NonMonotoneInParameter { at: f64 },
    #[error("Fisher information is singular at {at:?} (det {det:e})")]
    SingularInformation { at: Vec<f64>, det: f64 },
    #[error("family is not identifiable: parameters {a:?} and {b:?} give the same cdf")]
    NotIdentifiable { a: Vec<f64>, b: Vec<f64> },
    #[error("consistency factor '{label}' fails relative invariance under '{group}' (residual {residual:e})")]
    FactorNotInvariant {
        label: String,
        group: String,
        residual: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0} trial(s) failed to build a posterior")]
    FailedTrials(usize),
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::NonFinite { .. }
                | Error::NoSignChange { .. }
                | Error::PosteriorNotNormalizable { .. }
                | Error::ZeroMarginal { .. }
                | Error::NonDifferentiable { .. }
                | Error::SingularInformation { .. }
                | Error::FailedTrials(_)
        )
    }
}
