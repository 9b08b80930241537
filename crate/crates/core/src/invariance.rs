//! Group actions on sample and parameter space, invariance checks, the
//! trivial-action locus and the reduction maps `s`, `s̄` that carry an
//! invariant family to location form `F(x | λ) = Φ(s(x) − s̄(λ))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::families::{DirectFamily, MonotoneMap};
use crate::numerics::{
    build_grid, expand_bracket, find_root, integrate, one_sided_diffs, Interval, Tolerance,
};
use crate::scalar::Real;

type ActFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;
type ParamFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
type InverseFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
type Fn1<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A left action `l(a, x)` of a one- or two-parameter group on the sample
/// space together with the induced action `l̄(a, θ)` on parameter space.
/// Group elements are coordinate vectors.
#[derive(Clone)]
pub struct GroupAction<T: Real> {
    label: String,
    identity: Vec<T>,
    element_space: Vec<Interval<T>>,
    act: ActFn<T>,
    act_param: ParamFn<T>,
    compose: ParamFn<T>,
    inverse: InverseFn<T>,
    exact_derivative: Option<Fn1<T>>,
    exact_param_derivative: Option<Fn1<T>>,
}

impl<T: Real> fmt::Debug for GroupAction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupAction")
            .field("label", &self.label)
            .field("dim", &self.identity.len())
            .finish()
    }
}

impl<T: Real> GroupAction<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        identity: Vec<T>,
        element_space: Vec<Interval<T>>,
        act: impl Fn(&[T], T) -> T + Send + Sync + 'static,
        act_param: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        compose: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        inverse: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            identity,
            element_space,
            act: Arc::new(act),
            act_param: Arc::new(act_param),
            compose: Arc::new(compose),
            inverse: Arc::new(inverse),
            exact_derivative: None,
            exact_param_derivative: None,
        }
    }

    /// Supplies `∂_a l(a⁻¹, x)|_{a=e}` and `∂_a l̄(a⁻¹, λ)|_{a=e}` in closed
    /// form; they are cross-checked against finite differences.
    pub fn with_derivatives(
        mut self,
        sample: impl Fn(T) -> T + Send + Sync + 'static,
        param: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        self.exact_derivative = Some(Arc::new(sample));
        self.exact_param_derivative = Some(Arc::new(param));
        self
    }

    /// `x ↦ x + a`; on parameters the first component shifts.
    pub fn translation() -> Self {
        Self::new(
            "translation",
            vec![T::zero()],
            vec![Interval::real_line()],
            |a, x| x + a[0],
            |a, t| {
                let mut t = t.to_vec();
                t[0] = t[0] + a[0];
                t
            },
            |a, b| vec![a[0] + b[0]],
            |a| vec![-a[0]],
        )
        .with_derivatives(|_| -T::one(), |_| -T::one())
    }

    /// `x ↦ a x`, `a > 0`.
    pub fn scaling() -> Self {
        Self::scaling_about(T::zero())
    }

    /// `x ↦ c + a (x − c)`. On a one-component parameter `(σ)` it acts as
    /// `σ ↦ a σ`; on `(μ, σ)` as `(c + a(μ − c), a σ)`.
    pub fn scaling_about(c: T) -> Self {
        let label = if c == T::zero() {
            "scaling".to_string()
        } else {
            format!("scaling@{c}")
        };
        Self::new(
            label,
            vec![T::one()],
            vec![Interval::positive()],
            move |a, x| c + a[0] * (x - c),
            move |a, t| match t.len() {
                1 => vec![a[0] * t[0]],
                _ => vec![c + a[0] * (t[0] - c), a[0] * t[1]],
            },
            |a, b| vec![a[0] * b[0]],
            |a| vec![a[0].recip()],
        )
        .with_derivatives(move |x| c - x, |l| -l)
    }

    /// `x ↦ a₁ + a₂ x` with `a ∘ b = (a₂ b₁ + a₁, a₂ b₂)`; induced
    /// `(μ, σ) ↦ (a₂ μ + a₁, a₂ σ)`.
    pub fn affine() -> Self {
        Self::new(
            "affine",
            vec![T::zero(), T::one()],
            vec![Interval::real_line(), Interval::positive()],
            |a, x| a[0] + a[1] * x,
            |a, t| vec![a[1] * t[0] + a[0], a[1] * t[1]],
            |a, b| vec![a[1] * b[0] + a[0], a[1] * b[1]],
            |a| vec![-a[0] / a[1], a[1].recip()],
        )
    }

    /// The same group acting on `y = s(x)`: `l'(a, y) = s(l(a, s⁻¹(y)))`.
    pub fn conjugate(&self, map: MonotoneMap<T>) -> Self {
        let act = Arc::clone(&self.act);
        let m = map.clone();
        let mut g = Self {
            label: format!("{}∘{}", self.label, map.label()),
            act: Arc::new(move |a: &[T], y: T| m.apply(act(a, m.invert(y)))),
            exact_derivative: None,
            ..self.clone()
        };
        if let Some(d) = &self.exact_derivative {
            let d = Arc::clone(d);
            g.exact_derivative = Some(Arc::new(move |y: T| {
                let x = map.invert(y);
                map.derivative(x) * d(x)
            }));
        }
        g
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.identity.len()
    }

    pub fn identity(&self) -> &[T] {
        &self.identity
    }

    pub fn element_space(&self) -> &[Interval<T>] {
        &self.element_space
    }

    pub fn act(&self, a: &[T], x: T) -> T {
        (self.act)(a, x)
    }

    pub fn act_param(&self, a: &[T], theta: &[T]) -> Vec<T> {
        (self.act_param)(a, theta)
    }

    pub fn compose(&self, a: &[T], b: &[T]) -> Vec<T> {
        (self.compose)(a, b)
    }

    pub fn inverse(&self, a: &[T]) -> Vec<T> {
        (self.inverse)(a)
    }
}

/// Labels accepted by [`lookup_group`].
pub const GROUP_LABELS: &[&str] = &["translation", "scaling", "affine"];

pub fn lookup_group<T: Real>(label: &str) -> Result<GroupAction<T>> {
    match label {
        "translation" => Ok(GroupAction::translation()),
        "scaling" => Ok(GroupAction::scaling()),
        "affine" => Ok(GroupAction::affine()),
        _ => Err(Error::InvalidArgument(format!(
            "unknown group '{label}'; available: {}",
            GROUP_LABELS.join(", ")
        ))),
    }
}

/// `max |F(g_a(x) | ḡ_a(θ)) − F(x | θ)|` over elements, sample points and
/// parameters, with `1 − F` on the left when `g_a` reverses orientation.
pub fn check_invariance<T: Real>(
    fam: &DirectFamily<T>,
    grp: &GroupAction<T>,
    elements: &[Vec<T>],
    xs: &[T],
    thetas: &[Vec<T>],
) -> T {
    let mut worst = T::zero();
    for a in elements {
        for theta in thetas {
            let moved = grp.act_param(a, theta);
            for &x in xs {
                let y = grp.act(a, x);
                let h = x.diff_step();
                let increasing = grp.act(a, x + h) > grp.act(a, x - h);
                let lhs = if increasing {
                    fam.cdf(y, &moved)
                } else {
                    fam.sf(y, &moved)
                };
                let r = (lhs - fam.cdf(x, theta)).abs();
                if r.is_nan() {
                    return T::infinity();
                }
                worst = worst.max(r);
            }
        }
    }
    worst
}

fn derivative_at_identity<T: Real>(
    grp: &GroupAction<T>,
    f: impl Fn(T) -> T,
    exact: Option<&Fn1<T>>,
    at: T,
) -> Result<T> {
    if grp.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "group '{}' is not one-dimensional",
            grp.label()
        )));
    }
    let e = grp.identity[0];
    let (left, right) = one_sided_diffs(&f, e);
    let central = T::lit(0.5) * (left + right);
    if (left - right).abs() > T::lit(1e-3) * T::one().max(central.abs()) {
        return Err(Error::NonDifferentiable {
            left: left.as_f64(),
            right: right.as_f64(),
        });
    }
    if let Some(d) = exact {
        let v = d(at);
        debug_assert!(
            (v - central).abs() <= T::lit(1e-5) * T::one().max(v.abs()),
            "closed-form action derivative disagrees with finite differences"
        );
        return Ok(v);
    }
    Ok(central)
}

/// `∂_a l(a⁻¹, x)|_{a=e}` for a one-dimensional group.
pub fn action_derivative<T: Real>(grp: &GroupAction<T>, x: T) -> Result<T> {
    derivative_at_identity(
        grp,
        |a| grp.act(&grp.inverse(&[a]), x),
        grp.exact_derivative.as_ref(),
        x,
    )
}

/// `∂_a l̄(a⁻¹, λ)|_{a=e}` for a one-dimensional group acting on a
/// one-component parameter.
pub fn param_action_derivative<T: Real>(grp: &GroupAction<T>, lambda: T) -> Result<T> {
    derivative_at_identity(
        grp,
        |a| grp.act_param(&grp.inverse(&[a]), &[lambda])[0],
        grp.exact_param_derivative.as_ref(),
        lambda,
    )
}

fn locus_of<T: Real>(
    d: impl Fn(T) -> Result<T>,
    support: Interval<T>,
    grid: &[T],
) -> Result<Vec<T>> {
    let tol = Tolerance::<T>::default();
    let pts: Vec<T> = grid
        .iter()
        .cloned()
        .filter(|&x| support.contains(x))
        .collect();
    let vals = pts.iter().map(|&x| d(x)).collect::<Result<Vec<T>>>()?;
    let mut out: Vec<T> = Vec::new();
    for i in 0..pts.len() {
        if vals[i].abs() < tol.abs {
            out.push(pts[i]);
        } else if i + 1 < pts.len()
            && vals[i + 1].abs() >= tol.abs
            && vals[i].signum() != vals[i + 1].signum()
        {
            let root_tol = tol.with_rel(T::lit(1e-14));
            let r = find_root(
                |x| d(x).unwrap_or(T::nan()),
                Interval::new(pts[i], pts[i + 1])?,
                &root_tol,
            )?;
            out.push(r);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= T::lit(1e-9) * (T::one() + b.abs()));
    Ok(out)
}

/// Points of `support` where the action derivative vanishes, i.e. where
/// every group element leaves `x` fixed. Grid points are tested directly
/// and sign changes between neighbours refined by root finding.
pub fn trivial_locus<T: Real>(
    grp: &GroupAction<T>,
    support: Interval<T>,
    grid: &[T],
) -> Result<Vec<T>> {
    locus_of(|x| action_derivative(grp, x), support, grid)
}

/// The monotone coordinates `s`, `s̄` of an invariant family, anchored at
/// `s(x0) = 0`, `s̄(θ0) = 0` and oriented so that `s′ > 0`, `s̄′ > 0`.
#[derive(Clone, Debug)]
pub struct ReductionMaps<T: Real> {
    group: GroupAction<T>,
    x0: T,
    theta0: T,
    sample_sign: T,
    param_sign: T,
    branch: Interval<T>,
    param_branch: Interval<T>,
    tol: Tolerance<T>,
}

fn branch_around<T: Real>(locus: &[T], domain: Interval<T>, x0: T) -> Interval<T> {
    let lo = locus
        .iter()
        .cloned()
        .filter(|&p| p < x0)
        .fold(domain.lo, T::max);
    let hi = locus
        .iter()
        .cloned()
        .filter(|&p| p > x0)
        .fold(domain.hi, T::min);
    Interval { lo, hi }
}

fn default_anchor<T: Real>(d: impl Fn(T) -> Result<T>, domain: Interval<T>) -> Result<T> {
    let tol = Tolerance::<T>::default();
    for x in build_grid(domain, 64, None) {
        if domain.interior(x) && d(x)?.abs() >= tol.abs {
            return Ok(x);
        }
    }
    Err(Error::InvalidArgument(
        "no probe point off the trivial locus".to_string(),
    ))
}

/// Builds `s` and `s̄` for a one-dimensional group acting on a family with
/// a one-component parameter. Anchors default to the first probe point off
/// the trivial locus.
pub fn reduction_maps<T: Real>(
    grp: &GroupAction<T>,
    fam: &DirectFamily<T>,
    x0: Option<T>,
    theta0: Option<T>,
) -> Result<ReductionMaps<T>> {
    if fam.dim() != 1 {
        return Err(Error::InvalidArgument(
            "reduction maps need a one-component parameter".to_string(),
        ));
    }
    let pspace = fam.param_space()[0];
    let theta0 = match theta0 {
        Some(t) => t,
        None => default_anchor(|l| param_action_derivative(grp, l), pspace)?,
    };
    let support = fam.support(&[theta0]);
    let x0 = match x0 {
        Some(x) => x,
        None => default_anchor(|x| action_derivative(grp, x), support)?,
    };
    let dx0 = action_derivative(grp, x0)?;
    let dt0 = param_action_derivative(grp, theta0)?;
    let tol = Tolerance::<T>::default();
    if dx0.abs() < tol.abs {
        return Err(Error::TrivialLocusCrossed {
            from: x0.as_f64(),
            to: x0.as_f64(),
        });
    }
    if dt0.abs() < tol.abs {
        return Err(Error::InvalidArgument(format!(
            "parameter anchor {theta0} is fixed by the induced action"
        )));
    }
    let grid = build_grid(support, 257, None);
    let locus = trivial_locus(grp, support, &grid)?;
    let pgrid = build_grid(pspace, 257, None);
    let plocus = locus_of(|l| param_action_derivative(grp, l), pspace, &pgrid)?;
    Ok(ReductionMaps {
        group: grp.clone(),
        x0,
        theta0,
        sample_sign: dx0.signum(),
        param_sign: dt0.signum(),
        branch: branch_around(&locus, support, x0),
        param_branch: branch_around(&plocus, pspace, theta0),
        tol: tol
            .with_rel(T::lit(1e-13))
            .with_abs(T::lit(1e-15))
            .with_subdivisions(400),
    })
}

impl<T: Real> ReductionMaps<T> {
    pub fn branch(&self) -> Interval<T> {
        self.branch
    }

    pub fn param_branch(&self) -> Interval<T> {
        self.param_branch
    }

    pub fn s_prime(&self, x: T) -> Result<T> {
        Ok(self.sample_sign / action_derivative(&self.group, x)?)
    }

    pub fn s_bar_prime(&self, lambda: T) -> Result<T> {
        Ok(self.param_sign / param_action_derivative(&self.group, lambda)?)
    }

    fn accumulate(
        &self,
        d: impl Fn(T) -> Result<T>,
        sign: T,
        anchor: T,
        to: T,
        branch: Interval<T>,
    ) -> Result<T> {
        let crossed = || Error::TrivialLocusCrossed {
            from: anchor.as_f64(),
            to: to.as_f64(),
        };
        if !branch.interior(to) {
            return Err(crossed());
        }
        if to == anchor {
            return Ok(T::zero());
        }
        let (a, b) = if to > anchor {
            (anchor, to)
        } else {
            (to, anchor)
        };
        // sign changes inside the path mean a zero was crossed
        for i in 0..=16 {
            let t = a + (b - a) * T::from_usize(i).unwrap() / T::lit(16.0);
            let v = d(t)?;
            if v.signum() != sign || v.abs() < self.tol.abs {
                return Err(crossed());
            }
        }
        let v = integrate(
            |t| d(t).map(|v| sign / v).unwrap_or(T::nan()),
            Interval::new(a, b)?,
            &self.tol,
        )?;
        Ok(if to > anchor { v } else { -v })
    }

    /// `s(x) = ∫_{x0}^{x} dt / |∂_a l(a⁻¹, t)|_{a=e}|`.
    pub fn s(&self, x: T) -> Result<T> {
        self.accumulate(
            |t| action_derivative(&self.group, t),
            self.sample_sign,
            self.x0,
            x,
            self.branch,
        )
    }

    /// `s̄(λ)`, from the induced action.
    pub fn s_bar(&self, lambda: T) -> Result<T> {
        self.accumulate(
            |t| param_action_derivative(&self.group, t),
            self.param_sign,
            self.theta0,
            lambda,
            self.param_branch,
        )
    }

    fn invert(
        &self,
        f: impl Fn(T) -> Result<T>,
        z: T,
        anchor: T,
        branch: Interval<T>,
    ) -> Result<T> {
        let g = |x: T| f(x).map(|v| v - z).unwrap_or(T::nan());
        let step = T::lit(0.5) * T::one().max(anchor.abs());
        let bracket = expand_bracket(g, anchor, step, branch)?;
        find_root(
            g,
            bracket,
            &Tolerance::default()
                .with_rel(T::lit(1e-14))
                .with_abs(T::lit(1e-14)),
        )
    }

    pub fn s_inverse(&self, z: T) -> Result<T> {
        self.invert(|x| self.s(x), z, self.x0, self.branch)
    }

    pub fn s_bar_inverse(&self, z: T) -> Result<T> {
        self.invert(|l| self.s_bar(l), z, self.theta0, self.param_branch)
    }
}

/// For pairs `(x, λ)`, `(x′, λ′)` with `s(x) − s̄(λ) = s(x′) − s̄(λ′)`,
/// returns `max |F(x | λ) − F(x′ | λ′)|`. A family whose cdf is a
/// function of `s(x) − s̄(λ)` alone gives zero.
pub fn check_h_form<T: Real>(
    fam: &DirectFamily<T>,
    maps: &ReductionMaps<T>,
    xs: &[T],
    lambdas: &[T],
) -> Result<T> {
    let mut worst = T::zero();
    let mut pairs = 0usize;
    for &x in xs {
        let sx = maps.s(x)?;
        for &l in lambdas {
            let z = sx - maps.s_bar(l)?;
            let f = fam.cdf(x, &[l]);
            for &l2 in lambdas {
                if l2 == l {
                    continue;
                }
                let Ok(x2) = maps.s_inverse(z + maps.s_bar(l2)?) else {
                    continue;
                };
                pairs += 1;
                worst = worst.max((f - fam.cdf(x2, &[l2])).abs());
            }
        }
    }
    if pairs == 0 {
        return Err(Error::InvalidArgument(
            "no comparable (x, λ) pairs on the grid".to_string(),
        ));
    }
    Ok(worst)
}
