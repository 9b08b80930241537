use std::sync::Arc;

use crate::error::{Error, Result};
use crate::families::{parameter_probes, DirectFamily, MonotoneMap, Pin};
use crate::invariance::{action_derivative, GroupAction};
use crate::numerics::{maximize, Interval};
use crate::posterior::density::{LogFn, Posterior, PosteriorOptions, Provenance};
use crate::posterior::factor::{factor_functional_residual, ConsistencyFactor, FactorKind};

/// Whether custom factors are checked for relative invariance under the
/// family's group before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorMode {
    #[default]
    Strict,
    Unchecked,
}

const TRIVIAL_TOL: f64 = 1e-12;
const STRICT_TOL: f64 = 1e-6;

/// Group elements spread over the element space, used for factor checks.
pub fn probe_elements(grp: &GroupAction<f64>) -> Vec<Vec<f64>> {
    let pick = |space: &Interval<f64>, k: usize| -> f64 {
        let pos = [0.5, 1.7, 3.0];
        let real = [-1.3, 0.4, 2.2];
        if space.lo >= 0.0 {
            pos[k]
        } else {
            real[k]
        }
    };
    (0..3)
        .map(|k| grp.element_space().iter().map(|s| pick(s, k)).collect())
        .collect()
}

pub(crate) fn check_data(fam: &DirectFamily<f64>, data: &[f64]) -> Result<()> {
    if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("datum {bad} is not finite")));
    }
    if let Some(grp) = fam.group() {
        if grp.dim() == 1 {
            for &x in data {
                if action_derivative(&grp, x)?.abs() < TRIVIAL_TOL {
                    return Err(Error::TrivialLocusDatum { datum: x });
                }
            }
        }
    }
    Ok(())
}

/// Strict mode: custom factors must be relatively invariant under the family's group.
pub fn check_factor(
    fam: &DirectFamily<f64>,
    zeta: &ConsistencyFactor,
    mode: FactorMode,
) -> Result<()> {
    if mode == FactorMode::Unchecked || zeta.kind() != FactorKind::Custom {
        return Ok(());
    }
    let grp = fam.group().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "family '{}' declares no group to check factor '{}' against",
            fam.label(),
            zeta.label()
        ))
    })?;
    let thetas = parameter_probes(&**fam, 7);
    let r = factor_functional_residual(
        zeta,
        &grp,
        &probe_elements(&grp),
        &thetas,
        &fam.reference_theta(),
    );
    if r < STRICT_TOL {
        Ok(())
    } else {
        Err(Error::FactorNotInvariant {
            label: zeta.label().to_string(),
            group: grp.label().to_string(),
            residual: r,
        })
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Data-driven starting value for the mode search.
pub(crate) fn start_guess(fam: &DirectFamily<f64>, data: &[f64]) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    match fam.as_location_scale()?.pin() {
        Pin::Scale(_) => Some(mean(data)),
        Pin::Location(mu) => {
            let rms =
                (data.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / data.len() as f64).sqrt();
            (rms > 0.0).then_some(rms)
        }
        Pin::Joint => None,
    }
}

/// `f(θ | x) = ζ(θ) ∏ f(xᵢ | θ) / η` for a one-component parameter.
pub fn build_posterior(
    fam: &DirectFamily<f64>,
    zeta: &ConsistencyFactor,
    data: &[f64],
    mode: FactorMode,
    opts: &PosteriorOptions,
) -> Result<Posterior> {
    if fam.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "family '{}' has {} parameters; use build_posterior_2d",
            fam.label(),
            fam.dim()
        )));
    }
    check_data(fam, data)?;
    check_factor(fam, zeta, mode)?;
    let f = fam.clone();
    let z = zeta.clone();
    let xs = data.to_vec();
    let g: LogFn = Arc::new(move |t: f64| {
        let th = [t];
        xs.iter().map(|&x| f.ln_pdf(x, &th)).sum::<f64>() + z.ln_zeta(&th)
    });
    Posterior::from_log_density(
        g,
        fam.param_space()[0],
        start_guess(fam, data),
        opts,
        Provenance {
            family: fam.label().to_string(),
            factor: zeta.label().to_string(),
            data: data.to_vec(),
        },
    )
}

/// `f(θ | x, x_new) ∝ f(θ | x) f(x_new | θ)`.
pub fn sequential_update(
    prior: &Posterior,
    fam: &DirectFamily<f64>,
    x_new: f64,
    opts: &PosteriorOptions,
) -> Result<Posterior> {
    if fam.dim() != 1 {
        return Err(Error::InvalidArgument(
            "sequential updating needs a one-component parameter".to_string(),
        ));
    }
    check_data(fam, &[x_new])?;
    let p = prior.clone();
    let f = fam.clone();
    let g: LogFn = Arc::new(move |t: f64| p.ln_density(t) + f.ln_pdf(x_new, &[t]));
    let mut prov = prior.provenance().clone();
    prov.data.push(x_new);
    Posterior::from_log_density(g, prior.domain(), Some(prior.mode()), opts, prov)
}

/// Rejects maps whose derivative is zero or non-finite at a node, or has
/// an interior minimum of `|s′|` between nodes that refines to zero.
fn check_map_derivative(post: &Posterior, map: &MonotoneMap<f64>) -> Result<()> {
    let nodes: Vec<f64> = post
        .nodes()
        .iter()
        .cloned()
        .filter(|&t| post.domain().interior(t))
        .collect();
    let d: Vec<f64> = nodes.iter().map(|&t| map.derivative(t).abs()).collect();
    for (i, (&t, &v)) in nodes.iter().zip(&d).enumerate() {
        if v == 0.0 || !v.is_finite() {
            return Err(Error::DerivativeVanishes { at: t });
        }
        if i == 0 || i + 1 == nodes.len() || !(v <= d[i - 1] && v <= d[i + 1]) {
            continue;
        }
        let span = Interval::new(nodes[i - 1], nodes[i + 1])?;
        let step = 0.25 * (nodes[i + 1] - nodes[i - 1]);
        let (at, neg) = maximize(|x| -map.derivative(x).abs(), span, t, step)?;
        if -neg <= 1e-10 * d[i - 1].max(d[i + 1]) {
            return Err(Error::DerivativeVanishes { at });
        }
    }
    Ok(())
}

/// Push-forward of a posterior under a monotone reparameterization
/// `λ = s̄(θ)`. `η` is unchanged by the change of variables.
pub fn transform_posterior(
    post: &Posterior,
    map: &MonotoneMap<f64>,
    opts: &PosteriorOptions,
) -> Result<Posterior> {
    check_map_derivative(post, map)?;
    let domain = map.image(&post.domain());
    let p = post.clone();
    let m = map.clone();
    let g: LogFn = Arc::new(move |l: f64| {
        let t = m.invert(l);
        p.ln_density(t) + m.inverse_derivative(l).abs().ln()
    });
    let mut prov = post.provenance().clone();
    prov.family = format!("{}∘{}", prov.family, map.label());
    prov.factor = format!("{}∘{}", prov.factor, map.label());
    Ok(
        Posterior::from_log_density(g, domain, Some(map.apply(post.mode())), opts, prov)?
            .with_log_eta(post.log_eta()),
    )
}

/// Posterior predictive distribution of a new observation.
#[derive(Debug, Clone)]
pub struct Predictive {
    post: Posterior,
    fam: DirectFamily<f64>,
}

pub fn predictive_density(post: &Posterior, fam: &DirectFamily<f64>) -> Predictive {
    Predictive {
        post: post.clone(),
        fam: fam.clone(),
    }
}

impl Predictive {
    /// `∫ f(θ | x) f(x_new | θ) dθ`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.post.expect(|t| self.fam.pdf(x, &[t]))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.post.expect(|t| self.fam.cdf(x, &[t]))?.clamp(0.0, 1.0))
    }
}
