use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::MonotoneMap;
use crate::invariance::GroupAction;
use crate::numerics::central_diff;

type LnZeta = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    Location,
    Scale,
    JointLocationScale,
    Custom,
}

impl FactorKind {
    pub fn label(self) -> &'static str {
        match self {
            FactorKind::Location => "location",
            FactorKind::Scale => "scale",
            FactorKind::JointLocationScale => "joint",
            FactorKind::Custom => "custom",
        }
    }
}

/// A positive weight `ζ(θ)` on parameter space, defined up to a positive
/// constant. Held as `ln ζ` so that products with likelihoods stay in log
/// space.
#[derive(Clone)]
pub struct ConsistencyFactor {
    label: String,
    kind: FactorKind,
    ln_zeta: LnZeta,
}

impl fmt::Debug for ConsistencyFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConsistencyFactor")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .finish()
    }
}

/// The factor for location (`ζ = 1`), scale (`ζ = σ⁻¹`) or joint
/// location-scale (`ζ = σ⁻¹`) parameters. The scale is always the last
/// component of `θ`.
pub fn consistency_factor(kind: FactorKind) -> Result<ConsistencyFactor> {
    let ln_zeta: LnZeta = match kind {
        FactorKind::Location => Arc::new(|_: &[f64]| 0.0),
        FactorKind::Scale | FactorKind::JointLocationScale => {
            Arc::new(|t: &[f64]| -t[t.len() - 1].ln())
        }
        FactorKind::Custom => {
            return Err(Error::InvalidArgument(
                "custom factors are built with ConsistencyFactor::custom".to_string(),
            ))
        }
    };
    Ok(ConsistencyFactor {
        label: kind.label().to_string(),
        kind,
        ln_zeta,
    })
}

impl ConsistencyFactor {
    /// A user-supplied `ζ`. Non-positive values are mapped to `ln ζ = -inf`.
    pub fn custom(
        label: impl Into<String>,
        zeta: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::custom_ln(label, move |t| {
            let z = zeta(t);
            if z > 0.0 {
                z.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
    }

    pub fn custom_ln(
        label: impl Into<String>,
        ln_zeta: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            kind: FactorKind::Custom,
            ln_zeta: Arc::new(ln_zeta),
        }
    }

    /// `σ^(-p)` on the last component.
    pub fn scale_power(p: f64) -> Self {
        Self::custom_ln(format!("sigma^-{p}"), move |t| -p * t[t.len() - 1].ln())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn zeta(&self, theta: &[f64]) -> f64 {
        (self.ln_zeta)(theta).exp()
    }

    pub fn ln_zeta(&self, theta: &[f64]) -> f64 {
        (self.ln_zeta)(theta)
    }

    /// `c·ζ`, for `c > 0`; the kind is kept.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "factor multiplier must be positive, got {c}"
            )));
        }
        let inner = Arc::clone(&self.ln_zeta);
        let lc = c.ln();
        Ok(Self {
            label: format!("{c}*{}", self.label),
            kind: self.kind,
            ln_zeta: Arc::new(move |t| lc + inner(t)),
        })
    }
}

/// The factor in the coordinate `λ = s̄(θ)` of a one-component parameter:
/// `ζ′(λ) = ζ(s̄⁻¹(λ)) |∂_λ s̄⁻¹(λ)|`.
pub fn transform_factor(zeta: &ConsistencyFactor, map: &MonotoneMap<f64>) -> ConsistencyFactor {
    let inner = Arc::clone(&zeta.ln_zeta);
    let map = map.clone();
    ConsistencyFactor {
        label: format!("{}∘{}", zeta.label, map.label()),
        kind: FactorKind::Custom,
        ln_zeta: Arc::new(move |t: &[f64]| {
            let theta = map.invert(t[0]);
            inner(&[theta]) + map.inverse_derivative(t[0]).abs().ln()
        }),
    }
}

fn jacobian_det(f: impl Fn(&[f64]) -> Vec<f64>, theta: &[f64]) -> f64 {
    let m = theta.len();
    let mut j = vec![vec![0.0; m]; m];
    for c in 0..m {
        for (r, row) in j.iter_mut().enumerate() {
            row[c] = central_diff(
                |v| {
                    let mut t = theta.to_vec();
                    t[c] = v;
                    f(&t)[r]
                },
                theta[c],
            );
        }
    }
    match m {
        1 => j[0][0],
        2 => j[0][0] * j[1][1] - j[0][1] * j[1][0],
        _ => f64::NAN,
    }
}

/// Relative-invariance residual of `ζ` under the induced action: for each
/// element `a`, `χ(a)` is fixed at `theta_ref` and the returned value is
/// `max |ζ(θ) − χ(a) ζ(ḡ_a⁻¹θ) |∂_θ ḡ_a⁻¹θ||`, each term divided by
/// `max(1, ζ(θ))` so that the scale of `ζ` does not matter.
pub fn factor_functional_residual(
    zeta: &ConsistencyFactor,
    grp: &GroupAction<f64>,
    elements: &[Vec<f64>],
    thetas: &[Vec<f64>],
    theta_ref: &[f64],
) -> f64 {
    let pulled = |a_inv: &[f64], t: &[f64]| -> f64 {
        let moved = grp.act_param(a_inv, t);
        let jac = jacobian_det(|s| grp.act_param(a_inv, s), t).abs();
        zeta.zeta(&moved) * jac
    };
    let mut worst: f64 = 0.0;
    for a in elements {
        let a_inv = grp.inverse(a);
        let chi = zeta.zeta(theta_ref) / pulled(&a_inv, theta_ref);
        for t in thetas {
            let z = zeta.zeta(t);
            let r = (z - chi * pulled(&a_inv, t)).abs() / z.abs().max(1.0);
            if r.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(r);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_factor_values() {
        let loc = consistency_factor(FactorKind::Location).unwrap();
        assert_eq!(loc.zeta(&[7.0]), 1.0);
        let sc = consistency_factor(FactorKind::Scale).unwrap();
        assert!((sc.zeta(&[4.0]) - 0.25).abs() < 1e-15);
        let j = consistency_factor(FactorKind::JointLocationScale).unwrap();
        assert!((j.zeta(&[-3.0, 2.0]) - 0.5).abs() < 1e-15);
        assert!(consistency_factor(FactorKind::Custom).is_err());
    }

    fn affine_setup() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let elements = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.3, 7.0]];
        let mut thetas = Vec::new();
        for mu in [-4.0, -1.0, 0.0, 2.5] {
            for s in [0.2, 1.0, 3.0, 10.0] {
                thetas.push(vec![mu, s]);
            }
        }
        (elements, thetas)
    }

    #[test]
    fn joint_factor_is_relatively_invariant() {
        let (el, th) = affine_setup();
        let z = consistency_factor(FactorKind::JointLocationScale).unwrap();
        let r = factor_functional_residual(&z, &GroupAction::affine(), &el, &th, &[0.0, 1.0]);
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn location_factor_under_translation() {
        let z = consistency_factor(FactorKind::Location).unwrap();
        let th: Vec<Vec<f64>> = [-3.0, 0.0, 5.0].iter().map(|&m| vec![m]).collect();
        let r = factor_functional_residual(
            &z,
            &GroupAction::translation(),
            &[vec![1.5], vec![-4.0]],
            &th,
            &[0.0],
        );
        assert!(r < 1e-9, "{r}");
        let sq = ConsistencyFactor::custom("mu^2", |t| t[0] * t[0]);
        let r = factor_functional_residual(
            &sq,
            &GroupAction::translation(),
            &[vec![1.5], vec![-4.0]],
            &th,
            &[1.0],
        );
        assert!(r > 0.01, "{r}");
    }

    #[test]
    fn transformed_factor_of_scale_is_flat_in_log() {
        let z = consistency_factor(FactorKind::Scale).unwrap();
        let t = transform_factor(&z, &MonotoneMap::ln());
        for l in [-3.0, 0.0, 2.0] {
            assert!((t.zeta(&[l]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_keeps_kind() {
        let z = consistency_factor(FactorKind::Scale)
            .unwrap()
            .scaled(7.0)
            .unwrap();
        assert_eq!(z.kind(), FactorKind::Scale);
        assert!((z.zeta(&[2.0]) - 3.5).abs() < 1e-12);
        assert!(z.scaled(-1.0).is_err());
    }
}
