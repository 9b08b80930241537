//! Competing rules for choosing the weight on the parameter: Bayes'
//! uniform postulate, Jeffreys' Fisher-information rule and the reference
//! marginal for `λ = μ/σ`, and the machinery to compare them with the
//! consistency factors.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{DirectFamily, Pin};
use crate::numerics::{
    central_diff, integrate_with, log_integrate_peaked, Hint, Interval, MonotoneCubic, Tolerance,
};
use crate::posterior::{
    consistency_factor, product_rule_residual, ConsistencyFactor, Coordinate, FactorKind,
    Posterior, PosteriorOptions, Provenance,
};

/// `ℐᵢⱼ(θ) = ∫ ∂ᵢ ln f ∂ⱼ ln f f dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub entries: Vec<Vec<f64>>,
    pub at: Vec<f64>,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let mut a = self.entries.clone();
        let m = a.len();
        let mut det = 1.0;
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            if a[p][c] == 0.0 {
                return 0.0;
            }
            if p != c {
                a.swap(p, c);
                det = -det;
            }
            det *= a[c][c];
            for r in c + 1..m {
                let f = a[r][c] / a[c][c];
                for k in c..m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        det
    }
}

fn fisher_tolerance() -> Tolerance<f64> {
    Tolerance::default()
        .with_rel(1e-8)
        .with_abs(1e-300)
        .with_subdivisions(300)
}

/// Scores by central differences in each parameter component, the outer
/// product integrated over the support.
pub fn fisher_information(fam: &DirectFamily<f64>, theta: &[f64]) -> Result<FisherMatrix> {
    let m = fam.dim();
    if theta.len() != m {
        return Err(Error::InvalidArgument(format!(
            "family '{}' takes {m} parameters, got {}",
            fam.label(),
            theta.len()
        )));
    }
    let support = fam.support(theta);
    let q = |p: f64| fam.quantile(p, theta);
    let center = q(0.5)?;
    let scale = 0.5 * (q(0.75)? - q(0.25)?);
    let hint = Hint { center, scale };
    let score = |x: f64, i: usize| {
        central_diff(
            |v| {
                let mut t = theta.to_vec();
                t[i] = v;
                fam.ln_pdf(x, &t)
            },
            theta[i],
        )
    };
    let tol = fisher_tolerance();
    let mut entries = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let v = integrate_with(
                |x| {
                    let f = fam.pdf(x, theta);
                    if !(f > 0.0) {
                        return 0.0;
                    }
                    let s = score(x, i) * score(x, j) * f;
                    if s.is_finite() {
                        s
                    } else {
                        0.0
                    }
                },
                support,
                hint,
                &tol,
            )?;
            entries[i][j] = v;
            entries[j][i] = v;
        }
    }
    Ok(FisherMatrix {
        entries,
        at: theta.to_vec(),
    })
}

/// Smallest determinant accepted by [`jeffreys_factor`].
pub const SINGULAR_DET: f64 = 1e-12;
const HALF_SPAN: f64 = 6.0;
const AXIS_NODES: usize = 25;

fn axis(coord: Coordinate, reference: f64) -> Vec<f64> {
    let c = coord.w(reference);
    (0..AXIS_NODES)
        .map(|i| c - HALF_SPAN + 2.0 * HALF_SPAN * i as f64 / (AXIS_NODES - 1) as f64)
        .collect()
}

fn ln_root_det(fam: &DirectFamily<f64>, theta: Vec<f64>) -> Result<f64> {
    let d = fisher_information(fam, &theta)?.det();
    if !(d >= SINGULAR_DET) || !d.is_finite() {
        return Err(Error::SingularInformation { at: theta, det: d });
    }
    Ok(0.5 * d.ln())
}

/// Bilinear interpolation on a tensor grid, extended linearly outside.
struct Bilinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    v: Vec<Vec<f64>>,
}

impl Bilinear {
    fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
        let n = nodes.len();
        let i = nodes.partition_point(|&p| p <= x).clamp(1, n - 1) - 1;
        (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]))
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let (i, s) = Self::locate(&self.xs, x);
        let (j, t) = Self::locate(&self.ys, y);
        let v = &self.v;
        (1.0 - s) * (1.0 - t) * v[i][j]
            + s * (1.0 - t) * v[i + 1][j]
            + (1.0 - s) * t * v[i][j + 1]
            + s * t * v[i + 1][j + 1]
    }
}

/// `ζ_J(θ) = √det ℐ(θ)`, tabulated on a grid around the family's reference
/// parameter (spacing 0.5 in the working coordinates θ or ln θ) and
/// interpolated in `ln ζ_J`.
pub fn jeffreys_factor(fam: &DirectFamily<f64>) -> Result<ConsistencyFactor> {
    let spaces = fam.param_space();
    let reference = fam.reference_theta();
    let coords: Vec<Coordinate> = spaces.iter().map(|s| Coordinate::for_domain(*s)).collect();
    let label = format!("jeffreys({})", fam.label());
    match spaces.len() {
        1 => {
            let c = coords[0];
            let ws = axis(c, reference[0]);
            let vals = ws
                .par_iter()
                .map(|&w| ln_root_det(fam, vec![c.theta(w)]))
                .collect::<Result<Vec<f64>>>()?;
            let interp = MonotoneCubic::new(ws, vals);
            Ok(ConsistencyFactor::custom_ln(label, move |t| {
                interp.eval(c.w(t[0]))
            }))
        }
        2 => {
            let (c0, c1) = (coords[0], coords[1]);
            let xs = axis(c0, reference[0]);
            let ys = axis(c1, reference[1]);
            let v = xs
                .par_iter()
                .map(|&x| {
                    ys.iter()
                        .map(|&y| ln_root_det(fam, vec![c0.theta(x), c1.theta(y)]))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let table = Arc::new(Bilinear { xs, ys, v });
            Ok(ConsistencyFactor::custom_ln(label, move |t| {
                table.eval(c0.w(t[0]), c1.w(t[1]))
            }))
        }
        m => Err(Error::InvalidArgument(format!(
            "jeffreys_factor supports one or two parameters, got {m}"
        ))),
    }
}

/// Bayes' postulate, `ζ ≡ 1`.
pub fn uniform_factor() -> ConsistencyFactor {
    ConsistencyFactor::custom_ln("uniform", |_| 0.0)
}

/// A λ-marginal of the form
/// `exp(−nλ²/2) (1 + λ²/2)^(−s/2) ∫₀^∞ u^(n+k) exp(−u²/2 + rλu) du`
/// with power offset `k` and `s ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaKernel {
    pub label: &'static str,
    pub power_offset: i32,
    pub sqrt_damping: bool,
}

impl LambdaKernel {
    pub const REFERENCE: Self = Self {
        label: "reference",
        power_offset: -1,
        sqrt_damping: true,
    };
    /// Pushed forward from `σ⁻¹` on `(μ, σ)` through `λ = μ/σ`.
    pub const CONSISTENCY: Self = Self {
        label: "consistency",
        power_offset: -2,
        sqrt_damping: false,
    };
    /// The consistency marginal with `uⁿ`, as printed in the source text.
    pub const CONSISTENCY_AS_PRINTED: Self = Self {
        label: "consistency-as-printed",
        power_offset: 0,
        sqrt_damping: false,
    };

    pub fn exponent(&self, n: usize) -> Result<i32> {
        let k = n as i32 + self.power_offset;
        if k < 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel '{}' needs at least {} observations",
                self.label, -self.power_offset
            )));
        }
        Ok(k)
    }

    /// Unnormalized log-density at `λ`.
    pub fn ln_kernel(&self, lambda: f64, n: usize, r: f64) -> Result<f64> {
        let k = self.exponent(n)? as f64;
        let b = r * lambda;
        // u = e^w; the integrand peaks where u² − bu − (k+1) = 0
        let h = |w: f64| (k + 1.0) * w - 0.5 * (2.0 * w).exp() + b * w.exp();
        let u0 = 0.5 * (b + (b * b + 4.0 * (k + 1.0)).sqrt());
        let tol = Tolerance::default().with_rel(1e-12).with_abs(1e-300);
        let inner = log_integrate_peaked(h, Interval::real_line(), u0.ln(), 0.5, &tol)?;
        let damping = if self.sqrt_damping {
            -0.5 * (0.5 * lambda * lambda).ln_1p()
        } else {
            0.0
        };
        Ok(-0.5 * n as f64 * lambda * lambda + damping + inner.log_integral)
    }
}

/// `(n, r)` with `r = Σxᵢ / √Σxᵢ²`.
pub fn lambda_statistics(data: &[f64]) -> Result<(usize, f64)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "λ-marginals need at least 2 observations, got {n}"
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("data must be finite".to_string()));
    }
    let s2: f64 = data.iter().map(|x| x * x).sum();
    if !(s2 > 0.0) {
        return Err(Error::InvalidArgument(
            "λ-marginals need Σxᵢ² > 0".to_string(),
        ));
    }
    Ok((n, data.iter().sum::<f64>() / s2.sqrt()))
}

/// Half-width of the λ-domain: `exp(−nL²/2) = 1e-12`.
pub fn lambda_bound(n: usize) -> f64 {
    (2.0 * 1e12f64.ln() / n as f64).sqrt()
}

fn lambda_domain(n: usize) -> Interval<f64> {
    let l = lambda_bound(n);
    Interval { lo: -l, hi: l }
}

fn nan_to_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// The normalized λ-marginal for `kernel` on `[−L, L]`.
pub fn lambda_marginal(
    kernel: LambdaKernel,
    data: &[f64],
    opts: &PosteriorOptions,
) -> Result<Posterior> {
    let (n, r) = lambda_statistics(data)?;
    kernel.exponent(n)?;
    let g = Arc::new(move |l: f64| nan_to_neg_inf(kernel.ln_kernel(l, n, r).unwrap_or(f64::NAN)));
    Posterior::from_log_density(
        g,
        lambda_domain(n),
        Some(0.0),
        opts,
        Provenance {
            family: "normal".to_string(),
            factor: kernel.label.to_string(),
            data: data.to_vec(),
        },
    )
}

pub fn reference_marginal_lambda(data: &[f64]) -> Result<Posterior> {
    lambda_marginal(LambdaKernel::REFERENCE, data, &PosteriorOptions::default())
}

pub fn consistency_marginal_lambda(data: &[f64]) -> Result<Posterior> {
    lambda_marginal(
        LambdaKernel::CONSISTENCY,
        data,
        &PosteriorOptions::default(),
    )
}

fn joint_location_scale(fam: &DirectFamily<f64>) -> Result<()> {
    match fam.as_location_scale().map(|ls| ls.pin()) {
        Some(Pin::Joint) => Ok(()),
        _ => Err(Error::InvalidArgument(format!(
            "'{}' is not a joint location-scale family",
            fam.label()
        ))),
    }
}

const TAIL_DROP: f64 = 27.6;

/// The λ-marginal obtained by moving the joint posterior `ζ(μ, σ) ∏ f` to
/// `(λ, σ)` with `μ = λσ` (Jacobian σ) and integrating σ out.
pub fn lambda_marginal_via_joint(
    fam: &DirectFamily<f64>,
    joint_factor: &ConsistencyFactor,
    data: &[f64],
    opts: &PosteriorOptions,
) -> Result<Posterior> {
    joint_location_scale(fam)?;
    let (n, _) = lambda_statistics(data)?;
    let rms = (data.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let f = fam.clone();
    let z = joint_factor.clone();
    let xs = data.to_vec();
    let w0 = rms.ln();
    let g = Arc::new(move |l: f64| {
        // w = ln σ; the σ from dσ and the Jacobian σ give 2w
        let h = |w: f64| {
            let s = w.exp();
            let t = [l * s, s];
            nan_to_neg_inf(
                2.0 * w + z.ln_zeta(&t) + xs.iter().map(|&x| f.ln_pdf(x, &t)).sum::<f64>(),
            )
        };
        let tol = Tolerance::default().with_rel(1e-12).with_abs(1e-300);
        match log_integrate_peaked(h, Interval::real_line(), w0, 0.5, &tol) {
            // the integrand must fall well below its peak within 60 e-folds of σ
            Ok(p) if h(p.mode - 60.0).max(h(p.mode + 60.0)) < p.log_peak - TAIL_DROP => {
                p.log_integral
            }
            _ => f64::NAN,
        }
    });
    // a divergent σ-integral at the centre means no normalizable marginal
    if g(0.0).is_nan() {
        return Err(Error::PosteriorNotNormalizable {
            reason: format!(
                "σ-integral of factor '{}' diverges for these data",
                joint_factor.label()
            ),
        });
    }
    let g2 = Arc::clone(&g);
    Posterior::from_log_density(
        Arc::new(move |l| nan_to_neg_inf(g2(l))),
        lambda_domain(n),
        Some(0.0),
        opts,
        Provenance {
            family: fam.label().to_string(),
            factor: joint_factor.label().to_string(),
            data: data.to_vec(),
        },
    )
}

/// A rule for weighting the joint `(μ, σ)` parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorRule {
    Consistency,
    Reference,
    Jeffreys,
    Uniform,
}

impl PriorRule {
    pub const ALL: [PriorRule; 4] = [
        PriorRule::Consistency,
        PriorRule::Reference,
        PriorRule::Jeffreys,
        PriorRule::Uniform,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            PriorRule::Consistency => "consistency",
            PriorRule::Reference => "reference",
            PriorRule::Jeffreys => "jeffreys",
            PriorRule::Uniform => "uniform",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.label() == label)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown rule '{label}'; available: consistency, reference, jeffreys, uniform"
                ))
            })
    }

    /// The rule's weight on `(μ, σ)`.
    pub fn joint_factor(&self, fam: &DirectFamily<f64>) -> Result<ConsistencyFactor> {
        Ok(match self {
            PriorRule::Consistency => consistency_factor(FactorKind::JointLocationScale)?,
            PriorRule::Reference => ConsistencyFactor::custom_ln("reference", |t| {
                let (mu, s) = (t[0], t[1]);
                -2.0 * s.ln() - 0.5 * (0.5 * mu * mu / (s * s)).ln_1p()
            }),
            PriorRule::Jeffreys => jeffreys_factor(fam)?,
            PriorRule::Uniform => uniform_factor(),
        })
    }

    /// The normalized λ-marginal. For the normal family the consistency
    /// and reference rules use their closed kernels; everything else goes
    /// through the joint.
    pub fn lambda_marginal(
        &self,
        fam: &DirectFamily<f64>,
        data: &[f64],
        opts: &PosteriorOptions,
    ) -> Result<Posterior> {
        joint_location_scale(fam)?;
        let normal = fam
            .as_location_scale()
            .map(|ls| ls.base().label() == "normal")
            == Some(true);
        match self {
            PriorRule::Consistency if normal => {
                lambda_marginal(LambdaKernel::CONSISTENCY, data, opts)
            }
            PriorRule::Reference if normal => lambda_marginal(LambdaKernel::REFERENCE, data, opts),
            _ => lambda_marginal_via_joint(fam, &self.joint_factor(fam)?, data, opts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEcho {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleComparison {
    pub rule_a: String,
    pub rule_b: String,
    pub l1_distance: f64,
    /// `None` when the rule's joint posterior is not normalizable.
    pub product_rule_residual_a: Option<f64>,
    pub product_rule_residual_b: Option<f64>,
    pub grid_echo: GridEcho,
    pub grid: Vec<f64>,
    pub density_a: Vec<f64>,
    pub density_b: Vec<f64>,
}

/// Default comparison grid: 2049 uniform points on `[−L, L]`.
pub fn default_lambda_grid(n: usize) -> Vec<f64> {
    let l = lambda_bound(n);
    (0..2049)
        .map(|i| -l + 2.0 * l * i as f64 / 2048.0)
        .collect()
}

/// Trapezoid L1 distance of two tabulated densities.
pub fn l1_trapezoid(grid: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (1..grid.len())
        .map(|i| {
            0.5 * (grid[i] - grid[i - 1]) * ((a[i] - b[i]).abs() + (a[i - 1] - b[i - 1]).abs())
        })
        .sum()
}

fn residual_if_normalizable(
    rule: PriorRule,
    fam: &DirectFamily<f64>,
    data: &[f64],
    opts: &PosteriorOptions,
) -> Result<Option<f64>> {
    // at μ = x the likelihood has no σ-damping, so σ^-p factors diverge
    if data.windows(2).all(|w| w[0] == w[1]) {
        return Ok(None);
    }
    match product_rule_residual(fam, &rule.joint_factor(fam)?, data, opts) {
        Ok(r) => Ok(Some(r)),
        Err(Error::PosteriorNotNormalizable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// L1 distance between the two rules' λ-marginals on `grid` (default
/// [`default_lambda_grid`]) and each rule's product-rule residual.
pub fn compare_rules(
    rule_a: PriorRule,
    rule_b: PriorRule,
    fam: &DirectFamily<f64>,
    data: &[f64],
    grid: Option<Vec<f64>>,
    opts: &PosteriorOptions,
) -> Result<RuleComparison> {
    let (n, _) = lambda_statistics(data)?;
    let grid = grid.unwrap_or_else(|| default_lambda_grid(n));
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "comparison grid must be strictly increasing with at least 2 points".to_string(),
        ));
    }
    let pa = rule_a.lambda_marginal(fam, data, opts)?;
    let pb = rule_b.lambda_marginal(fam, data, opts)?;
    let density_a: Vec<f64> = grid.iter().map(|&l| pa.density(l)).collect();
    let density_b: Vec<f64> = grid.iter().map(|&l| pb.density(l)).collect();
    Ok(RuleComparison {
        rule_a: rule_a.label().to_string(),
        rule_b: rule_b.label().to_string(),
        l1_distance: l1_trapezoid(&grid, &density_a, &density_b),
        product_rule_residual_a: residual_if_normalizable(rule_a, fam, data, opts)?,
        product_rule_residual_b: residual_if_normalizable(rule_b, fam, data, opts)?,
        grid_echo: GridEcho {
            lo: grid[0],
            hi: grid[grid.len() - 1],
            points: grid.len(),
        },
        grid,
        density_a,
        density_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{lookup, FamilySpec, MonotoneMap};
    use crate::numerics::{integrate, RandomStream};
    use crate::posterior::transform_factor;
    use approx::assert_abs_diff_eq;

    fn normal() -> DirectFamily<f64> {
        lookup("normal").unwrap()
    }

    #[test]
    fn fisher_matches_closed_forms() {
        let f = fisher_information(&normal(), &[0.3, 1.0]).unwrap();
        let want = [[1.0, 0.0], [0.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(f.entries[i][j], want[i][j], epsilon = 1e-5);
            }
        }
        let f = fisher_information(&normal(), &[-1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(f.entries[0][0], 0.25, epsilon = 1e-5);
        assert_abs_diff_eq!(f.entries[1][1], 0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(f.entries[0][1], 0.0, epsilon = 1e-5);
        let e = lookup("exponential-scale").unwrap();
        assert_abs_diff_eq!(
            fisher_information(&e, &[2.0]).unwrap().entries[0][0],
            0.25,
            epsilon = 1e-5
        );
    }

    #[test]
    fn fisher_at_random_parameters() {
        let mut rng = RandomStream::new(11, 0);
        let n = normal();
        let e = lookup("exponential-scale").unwrap();
        for _ in 0..10 {
            let mu = -5.0 + 10.0 * rng.uniform();
            let s = (-2.0 + 4.0 * rng.uniform()).exp();
            let f = fisher_information(&n, &[mu, s]).unwrap();
            assert!((f.entries[0][0] - 1.0 / (s * s)).abs() < 1e-5 * (1.0 / (s * s)).max(1.0));
            assert!((f.entries[1][1] - 2.0 / (s * s)).abs() < 1e-5 * (2.0 / (s * s)).max(1.0));
            assert!(f.entries[0][1].abs() < 1e-5 * (1.0 / (s * s)).max(1.0));
            let g = fisher_information(&e, &[s]).unwrap();
            assert!((g.entries[0][0] - 1.0 / (s * s)).abs() < 1e-5 * (1.0 / (s * s)).max(1.0));
        }
    }

    #[test]
    fn determinant() {
        let m = FisherMatrix {
            entries: vec![
                vec![0.0, 2.0, 1.0],
                vec![1.0, 1.0, 0.0],
                vec![3.0, 0.0, 1.0],
            ],
            at: vec![],
        };
        // cofactor expansion: 0·1 − 2·(1 − 0) + 1·(0 − 3) = −5
        assert_abs_diff_eq!(m.det(), -5.0, epsilon = 1e-14);
    }

    #[test]
    fn jeffreys_ratios() {
        let j = jeffreys_factor(&normal()).unwrap();
        let r = j.zeta(&[0.4, 1.0]) / j.zeta(&[0.4, 2.0]);
        assert!((r / 4.0 - 1.0).abs() < 1e-4, "{r}");
        let r = j.zeta(&[-3.0, 0.7]) / j.zeta(&[2.5, 0.7]);
        assert!((r - 1.0).abs() < 1e-4, "{r}");

        let j = jeffreys_factor(&lookup("normal-location").unwrap()).unwrap();
        assert!((j.zeta(&[-2.0]) / j.zeta(&[3.0]) - 1.0).abs() < 1e-5);

        let j = jeffreys_factor(&lookup("normal-scale").unwrap()).unwrap();
        let r = j.zeta(&[0.5]) / j.zeta(&[3.0]);
        assert!((r / 6.0 - 1.0).abs() < 1e-4, "{r}");
    }

    #[test]
    fn jeffreys_is_reparameterization_covariant() {
        // exponential with λ = ln σ as the parameter
        let fam_l = DirectFamily::custom_unchecked(FamilySpec::new(
            "exponential-log-scale",
            vec![Interval::real_line()],
            vec![0.0],
            |x: f64, t: &[f64]| {
                let s = t[0].exp();
                if x < 0.0 {
                    0.0
                } else {
                    (-x / s).exp() / s
                }
            },
            |x: f64, t: &[f64]| {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / t[0].exp()).exp_m1()
                }
            },
            |_| Interval::positive(),
        ));
        let direct = jeffreys_factor(&fam_l).unwrap();
        let pushed = transform_factor(
            &jeffreys_factor(&lookup("exponential-scale").unwrap()).unwrap(),
            &MonotoneMap::ln(),
        );
        for l in [-2.0, -0.5, 0.0, 1.0, 2.5] {
            assert!((direct.zeta(&[l]) - pushed.zeta(&[l])).abs() < 1e-5, "{l}");
        }
    }

    #[test]
    fn uniform_is_not_reparameterization_covariant() {
        let u = uniform_factor();
        assert_eq!(u.zeta(&[3.7]), 1.0);
        let pushed = transform_factor(&u, &MonotoneMap::ln());
        // e^λ
        let worst = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&l| (pushed.zeta(&[l]) - u.zeta(&[l])).abs())
            .fold(0.0, f64::max);
        assert!(worst > 0.01);
        assert_abs_diff_eq!(pushed.zeta(&[1.0]), 1f64.exp(), epsilon = 1e-12);
    }

    /// `∫₀^∞ u^k e^{−u²/2 + bu} du` by the recurrence
    /// `I_k = b I_{k−1} + (k−1) I_{k−2}`.
    fn moment_oracle(k: usize, b: f64) -> f64 {
        let phi = 0.5 * libm::erfc(-b / 2f64.sqrt());
        let i0 = (2.0 * std::f64::consts::PI).sqrt() * (0.5 * b * b).exp() * phi;
        let i1 = 1.0 + b * i0;
        if k == 0 {
            return i0;
        }
        let (mut a, mut c) = (i0, i1);
        for j in 2..=k {
            let next = b * c + (j - 1) as f64 * a;
            a = c;
            c = next;
        }
        c
    }

    #[test]
    fn kernels_match_moment_recurrence() {
        for kernel in [
            LambdaKernel::REFERENCE,
            LambdaKernel::CONSISTENCY,
            LambdaKernel::CONSISTENCY_AS_PRINTED,
        ] {
            for n in [2usize, 3, 5] {
                for (l, r) in [(0.0f64, 1.2), (0.7, 1.4), (-1.3, 0.5), (2.0, 2f64.sqrt())] {
                    let k = kernel.exponent(n).unwrap() as usize;
                    let damp = if kernel.sqrt_damping {
                        (1.0 + 0.5 * l * l).sqrt()
                    } else {
                        1.0
                    };
                    let want = (-0.5 * n as f64 * l * l).exp() / damp * moment_oracle(k, r * l);
                    let got = kernel.ln_kernel(l, n, r).unwrap().exp();
                    assert!(
                        (got / want - 1.0).abs() < 1e-9,
                        "{} n={n} λ={l}",
                        kernel.label
                    );
                }
            }
        }
    }

    #[test]
    fn kernel_structure() {
        // reference and consistency differ by one power of u and the damping
        let (r, c) = (LambdaKernel::REFERENCE, LambdaKernel::CONSISTENCY);
        assert_eq!(r.power_offset - c.power_offset, 1);
        assert!(r.sqrt_damping && !c.sqrt_damping);
        assert_eq!(LambdaKernel::CONSISTENCY_AS_PRINTED.exponent(2).unwrap(), 2);
    }

    fn mass(p: &Posterior) -> f64 {
        let tol = Tolerance::default().with_subdivisions(400);
        integrate(|l| p.density(l), p.domain(), &tol).unwrap()
    }

    #[test]
    fn marginals_normalize() {
        let r = reference_marginal_lambda(&[1.0, 1.0]).unwrap();
        let c = consistency_marginal_lambda(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(mass(&r), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(mass(&c), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(
            lambda_statistics(&[1.0, 1.0]).unwrap().1,
            2f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn marginals_depend_only_on_r_and_n() {
        let a = reference_marginal_lambda(&[1.0, 1.0]).unwrap();
        let b = reference_marginal_lambda(&[2.0, 2.0]).unwrap();
        let c = consistency_marginal_lambda(&[0.3, 1.7, 2.2]).unwrap();
        let d = consistency_marginal_lambda(&[0.6, 3.4, 4.4]).unwrap();
        for i in 0..=40 {
            let l = -2.0 + 0.1 * i as f64;
            assert!((a.density(l) - b.density(l)).abs() < 1e-8);
            assert!((c.density(l) - d.density(l)).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_sum_data_give_symmetric_marginals() {
        let p = reference_marginal_lambda(&[1.0, -1.0]).unwrap();
        for i in 1..=30 {
            let l = 0.1 * i as f64;
            assert!((p.density(l) - p.density(-l)).abs() < 1e-7);
        }
    }

    #[test]
    fn too_little_data() {
        assert!(reference_marginal_lambda(&[1.0]).is_err());
        assert!(consistency_marginal_lambda(&[0.0, 0.0]).is_err());
    }

    fn l1(a: &Posterior, b: &Posterior) -> f64 {
        let g = default_lambda_grid(a.provenance().data.len());
        let da: Vec<f64> = g.iter().map(|&l| a.density(l)).collect();
        let db: Vec<f64> = g.iter().map(|&l| b.density(l)).collect();
        l1_trapezoid(&g, &da, &db)
    }

    #[test]
    fn closed_consistency_route_matches_joint_route() {
        let joint = consistency_factor(FactorKind::JointLocationScale).unwrap();
        let opts = PosteriorOptions::default();
        for data in [vec![1.0, 1.0], vec![0.3, 1.7, 2.2]] {
            let closed = lambda_marginal(LambdaKernel::CONSISTENCY, &data, &opts).unwrap();
            let routed = lambda_marginal_via_joint(&normal(), &joint, &data, &opts).unwrap();
            let d = l1(&closed, &routed);
            assert!(d < 1e-4, "{data:?}: {d}");
            let printed =
                lambda_marginal(LambdaKernel::CONSISTENCY_AS_PRINTED, &data, &opts).unwrap();
            assert!(l1(&printed, &routed) > 0.01);
        }
    }

    #[test]
    fn closed_reference_route_matches_its_joint_factor() {
        let opts = PosteriorOptions::default();
        let data = [0.3, 1.7, 2.2];
        let closed = lambda_marginal(LambdaKernel::REFERENCE, &data, &opts).unwrap();
        let joint = PriorRule::Reference.joint_factor(&normal()).unwrap();
        let routed = lambda_marginal_via_joint(&normal(), &joint, &data, &opts).unwrap();
        assert!(l1(&closed, &routed) < 1e-4);
    }

    #[test]
    fn consistency_and_reference_disagree() {
        let opts = PosteriorOptions::default();
        let c = compare_rules(
            PriorRule::Consistency,
            PriorRule::Reference,
            &normal(),
            &[1.0, 1.0],
            None,
            &opts,
        )
        .unwrap();
        assert!(c.l1_distance > 0.01, "{}", c.l1_distance);
        assert_eq!(c.grid_echo.points, 2049);
        // all-equal data: no normalizable joint, so no product residual
        assert_eq!(c.product_rule_residual_a, None);
        let same = compare_rules(
            PriorRule::Consistency,
            PriorRule::Consistency,
            &normal(),
            &[1.0, 1.0],
            None,
            &opts,
        )
        .unwrap();
        assert!(same.l1_distance < 1e-9);
    }

    #[test]
    fn uniform_rule_is_not_normalizable_for_two_points() {
        let err = PriorRule::Uniform
            .lambda_marginal(&normal(), &[1.0, 1.0], &PosteriorOptions::default())
            .unwrap_err();
        assert!(
            matches!(err, Error::PosteriorNotNormalizable { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn rule_labels_round_trip() {
        for r in PriorRule::ALL {
            assert_eq!(PriorRule::from_label(r.label()).unwrap(), r);
        }
        assert!(PriorRule::from_label("maxent").is_err());
    }
}
