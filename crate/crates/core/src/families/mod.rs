//! Parametric families of direct distributions `F(x | θ)`.
//!
//! Parameter vectors have a fixed order: `(μ)` for a pure location family
//! (σ pinned), `(σ)` for a pure scale family (μ pinned) and `(μ, σ)` for
//! the joint family.

mod base;
mod location_scale;
mod split;
mod transform;

pub use base::{Base, Cauchy, Exponential, FnBase, Logistic, Normal, SharedBase};
pub use location_scale::{LocationScaleFamily, Pin};
pub use split::{reduce_scale_to_location, signed_split, Sign, SignedSplit};
pub use transform::{transform_variable, MonotoneMap};

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::invariance::GroupAction;
use crate::numerics::{build_grid, expand_bracket, find_root, Interval, RandomStream, Tolerance};
use crate::scalar::Real;

/// A parametric family of direct probability distributions.
pub trait Family<T: Real>: Send + Sync {
    fn label(&self) -> &str;
    fn param_space(&self) -> Vec<Interval<T>>;
    fn support(&self, theta: &[T]) -> Interval<T>;
    fn pdf(&self, x: T, theta: &[T]) -> T;
    fn cdf(&self, x: T, theta: &[T]) -> T;

    /// An admissible parameter used for probes.
    fn reference_theta(&self) -> Vec<T>;

    fn dim(&self) -> usize {
        self.param_space().len()
    }

    fn ln_pdf(&self, x: T, theta: &[T]) -> T {
        self.pdf(x, theta).ln()
    }

    fn sf(&self, x: T, theta: &[T]) -> T {
        T::one() - self.cdf(x, theta)
    }

    fn quantile(&self, p: T, theta: &[T]) -> Result<T> {
        let support = self.support(theta);
        if p <= T::zero() {
            return Ok(support.lo);
        }
        if p >= T::one() {
            return Ok(support.hi);
        }
        let start = match (support.lo.is_finite(), support.hi.is_finite()) {
            (true, true) => T::lit(0.5) * (support.lo + support.hi),
            (true, false) => support.lo + T::one(),
            (false, true) => support.hi - T::one(),
            (false, false) => T::zero(),
        };
        let g = |x: T| self.cdf(x, theta) - p;
        let bracket = expand_bracket(g, start, T::one(), support)?;
        let tol = Tolerance::default()
            .with_rel(T::lit(4.0) * T::epsilon())
            .with_abs(T::min_positive_value());
        find_root(g, bracket, &tol)
    }

    /// The group the family is declared invariant under, if any.
    fn group(&self) -> Option<GroupAction<T>> {
        None
    }

    fn as_location_scale(&self) -> Option<&LocationScaleFamily<T>> {
        None
    }
}

/// Shared handle to a family.
#[derive(Clone)]
pub struct DirectFamily<T: Real>(Arc<dyn Family<T>>);

impl<T: Real> DirectFamily<T> {
    pub fn new(family: impl Family<T> + 'static) -> Self {
        Self(Arc::new(family))
    }

    /// Wraps a user-supplied family after checking identifiability on a
    /// probe grid.
    pub fn custom(spec: FamilySpec<T>) -> Result<Self> {
        let fam = Self::new(spec);
        check_identifiable(&fam)?;
        Ok(fam)
    }

    /// Wraps a user-supplied family without the identifiability probe.
    pub fn custom_unchecked(spec: FamilySpec<T>) -> Self {
        Self::new(spec)
    }

    /// Inverse-cdf draw.
    pub fn sample(&self, theta: &[T], stream: &mut RandomStream) -> Result<T> {
        let u = T::lit(stream.uniform());
        self.quantile(u, theta)
    }
}

impl<T: Real> Deref for DirectFamily<T> {
    type Target = dyn Family<T>;

    fn deref(&self) -> &Self::Target {
        &*self.0
    }
}

impl<T: Real> fmt::Debug for DirectFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("DirectFamily").field(&self.label()).finish()
    }
}

type PdfFn<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;
type SupportFn<T> = Arc<dyn Fn(&[T]) -> Interval<T> + Send + Sync>;

/// A family given by closures.
#[derive(Clone)]
pub struct FamilySpec<T: Real> {
    pub label: String,
    pub param_space: Vec<Interval<T>>,
    pub reference_theta: Vec<T>,
    pub pdf: PdfFn<T>,
    pub cdf: PdfFn<T>,
    pub support: SupportFn<T>,
    pub group: Option<GroupAction<T>>,
}

impl<T: Real> FamilySpec<T> {
    pub fn new(
        label: impl Into<String>,
        param_space: Vec<Interval<T>>,
        reference_theta: Vec<T>,
        pdf: impl Fn(T, &[T]) -> T + Send + Sync + 'static,
        cdf: impl Fn(T, &[T]) -> T + Send + Sync + 'static,
        support: impl Fn(&[T]) -> Interval<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            param_space,
            reference_theta,
            pdf: Arc::new(pdf),
            cdf: Arc::new(cdf),
            support: Arc::new(support),
            group: None,
        }
    }

    pub fn with_group(mut self, group: GroupAction<T>) -> Self {
        self.group = Some(group);
        self
    }
}

impl<T: Real> Family<T> for FamilySpec<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn param_space(&self) -> Vec<Interval<T>> {
        self.param_space.clone()
    }

    fn support(&self, theta: &[T]) -> Interval<T> {
        (self.support)(theta)
    }

    fn pdf(&self, x: T, theta: &[T]) -> T {
        (self.pdf)(x, theta)
    }

    fn cdf(&self, x: T, theta: &[T]) -> T {
        (self.cdf)(x, theta)
    }

    fn reference_theta(&self) -> Vec<T> {
        self.reference_theta.clone()
    }

    fn group(&self) -> Option<GroupAction<T>> {
        self.group.clone()
    }
}

/// Parameter probes: the reference parameter with one component at a
/// time replaced by grid values.
pub fn parameter_probes<T: Real>(fam: &dyn Family<T>, per_axis: usize) -> Vec<Vec<T>> {
    let reference = fam.reference_theta();
    let mut probes = vec![reference.clone()];
    for (i, space) in fam.param_space().iter().enumerate() {
        for v in build_grid(*space, per_axis, None) {
            if !space.interior(v) {
                continue;
            }
            let mut t = reference.clone();
            t[i] = v;
            if !probes.contains(&t) {
                probes.push(t);
            }
        }
    }
    probes
}

fn check_identifiable<T: Real>(fam: &DirectFamily<T>) -> Result<()> {
    let probes = parameter_probes(&**fam, 5);
    for (i, a) in probes.iter().enumerate() {
        for b in &probes[i + 1..] {
            let mut xs = build_grid(fam.support(a), 64, None);
            xs.extend(build_grid(fam.support(b), 64, None));
            let gap = xs
                .iter()
                .filter(|x| x.is_finite())
                .map(|&x| (fam.cdf(x, a) - fam.cdf(x, b)).abs())
                .fold(T::zero(), T::max);
            if !(gap > T::lit(1e-12)) {
                return Err(Error::NotIdentifiable {
                    a: a.iter().map(|v| v.as_f64()).collect(),
                    b: b.iter().map(|v| v.as_f64()).collect(),
                });
            }
        }
    }
    Ok(())
}

/// Labels accepted by [`lookup`].
pub const LABELS: &[&str] = &[
    "normal",
    "normal-location",
    "normal-scale",
    "cauchy",
    "cauchy-location",
    "cauchy-scale",
    "logistic",
    "logistic-location",
    "logistic-scale",
    "exponential",
    "exponential-location",
    "exponential-scale",
];

fn base_by_label<T: Real>(label: &str) -> Option<SharedBase<T>> {
    Some(match label {
        "normal" => Arc::new(Normal),
        "cauchy" => Arc::new(Cauchy),
        "logistic" => Arc::new(Logistic),
        "exponential" => Arc::new(Exponential),
        _ => return None,
    })
}

/// Built-in family registry. `<base>` is the joint `(μ, σ)` family,
/// `<base>-location` pins `σ = 1` and `<base>-scale` pins `μ = 0`.
pub fn lookup<T: Real>(label: &str) -> Result<DirectFamily<T>> {
    let unknown = || {
        Error::InvalidArgument(format!(
            "unknown family '{label}'; available: {}",
            LABELS.join(", ")
        ))
    };
    let (base_label, pin) = match label.rsplit_once('-') {
        Some((b, "location")) => (b, Pin::Scale(T::one())),
        Some((b, "scale")) => (b, Pin::Location(T::zero())),
        _ => (label, Pin::Joint),
    };
    let base = base_by_label::<T>(base_label).ok_or_else(unknown)?;
    Ok(DirectFamily::new(LocationScaleFamily::new(base, pin)))
}
