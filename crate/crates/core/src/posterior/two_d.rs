use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{DirectFamily, Pin};
use crate::numerics::{local_scale, log_integrate_peaked, maximize, Interval, Tolerance};
use crate::posterior::build::{build_posterior, check_data, FactorMode};
use crate::posterior::density::{LogFn, Posterior, PosteriorOptions, Provenance};
use crate::posterior::factor::{consistency_factor, ConsistencyFactor, FactorKind};

type LogFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Grid side of the stored tensor-product table.
pub const GRID_SIDE: usize = 256;
const ZERO_MARGINAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Mu,
    Sigma,
}

/// Joint posterior over `(μ, σ)`. Marginals are computed by iterated
/// quadrature, the inner integral done in log space around its peak.
#[derive(Clone)]
pub struct Posterior2D {
    g: LogFn2,
    family: String,
    factor: String,
    data: Vec<f64>,
    log_eta: f64,
    marginal_mu: Posterior,
    marginal_sigma: Posterior,
    mu_grid: Vec<f64>,
    sigma_grid: Vec<f64>,
    density_grid: Vec<Vec<f64>>,
    opts: PosteriorOptions,
}

impl std::fmt::Debug for Posterior2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Posterior2D")
            .field("family", &self.family)
            .field("factor", &self.factor)
            .field("data", &self.data)
            .field("log_eta", &self.log_eta)
            .finish()
    }
}

/// Result of an inner integral; `approximate` marks a Laplace estimate used
/// where quadrature could not converge.
#[derive(Clone, Copy)]
struct Inner {
    value: f64,
    approximate: bool,
}

/// Peaked log-space integral. Far from the bulk the log-likelihood is a
/// difference of large terms and its rounding noise can defeat adaptive
/// quadrature; there the Laplace estimate is returned and flagged, and the
/// caller checks afterwards that such points carry no mass. Failure to find
/// a peak (divergence) is an error.
fn ln_peaked(h: impl Fn(f64) -> f64, start: f64, step: f64) -> Result<Inner> {
    let tol = Tolerance::default()
        .with_rel(1e-11)
        .with_abs(1e-15)
        .with_subdivisions(200);
    let (mode, peak) = maximize(&h, Interval::real_line(), start, step)?;
    if !peak.is_finite() {
        return Err(Error::PosteriorNotNormalizable {
            reason: format!("inner log-integrand peak is {peak}"),
        });
    }
    match log_integrate_peaked(&h, Interval::real_line(), mode, step, &tol) {
        Ok(p) => Ok(Inner {
            value: p.log_integral,
            approximate: false,
        }),
        Err(Error::PosteriorNotNormalizable { .. }) => {
            let scale = local_scale(&h, mode, peak, &Interval::real_line(), step);
            Ok(Inner {
                value: peak + (scale * (2.0 * std::f64::consts::PI).sqrt()).ln(),
                approximate: true,
            })
        }
        Err(e) => Err(e),
    }
}

fn rms_about(data: &[f64], c: f64) -> f64 {
    let v = (data.iter().map(|x| (x - c) * (x - c)).sum::<f64>() / data.len() as f64).sqrt();
    if v > 0.0 && v.is_finite() {
        v
    } else {
        1.0
    }
}

/// Best of a coarse ladder of probes around `start`, or `None` if the
/// integrand vanishes on all of them.
fn ladder_start(h: &impl Fn(f64) -> f64, start: f64, step: f64) -> Option<f64> {
    (-12..=12)
        .map(|k| start + step * k as f64)
        .map(|x| (x, h(x)))
        .filter(|p| p.1 > f64::NEG_INFINITY)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
}

const VANISHES: Inner = Inner {
    value: f64::NEG_INFINITY,
    approximate: false,
};

/// `ln ∫ exp(g(μ, σ)) dσ` over `σ > 0`, integrating in `ln σ`.
fn ln_integral_over_sigma(g: &LogFn2, mu: f64, s0: f64) -> Result<Inner> {
    let h = |w: f64| g(mu, w.exp()) + w;
    match ladder_start(&h, s0.ln(), 2.5) {
        Some(w0) => ln_peaked(h, w0, 0.5),
        None => Ok(VANISHES),
    }
}

/// `ln ∫ exp(g(μ, σ)) dμ` over the real line.
fn ln_integral_over_mu(g: &LogFn2, sigma: f64, m0: f64) -> Result<Inner> {
    let h = |m: f64| g(m, sigma);
    match ladder_start(&h, m0, 2.5 * sigma) {
        Some(start) => ln_peaked(h, start, sigma),
        None => Ok(VANISHES),
    }
}

#[derive(Default)]
struct Failures {
    error: Option<Error>,
    approximated: Vec<(f64, f64)>,
}

/// Wraps an inner integral so that the first failure is kept for
/// reporting while the outer quadrature sees `NaN`; Laplace fallbacks are
/// logged with their values.
fn guarded(
    f: impl Fn(f64) -> Result<Inner> + Send + Sync + 'static,
) -> (LogFn, Arc<Mutex<Failures>>) {
    let slot = Arc::new(Mutex::new(Failures::default()));
    let s = Arc::clone(&slot);
    let g: LogFn = Arc::new(move |t| match f(t) {
        Ok(r) => {
            if r.approximate {
                s.lock().unwrap().approximated.push((t, r.value));
            }
            r.value
        }
        Err(e) => {
            let mut guard = s.lock().unwrap();
            if guard.error.is_none() {
                guard.error = Some(e);
            }
            f64::NAN
        }
    });
    (g, slot)
}

/// Fails if an inner integral diverged, or if a Laplace fallback was used
/// where the outer density is not negligible.
fn check_inner(slot: &Mutex<Failures>, outer: &Result<Posterior>) -> Result<()> {
    let mut f = slot.lock().unwrap();
    if let Some(e) = f.error.take() {
        return Err(Error::PosteriorNotNormalizable {
            reason: format!("inner integral diverges: {e}"),
        });
    }
    if let Ok(post) = outer {
        let log_eta = post.log_eta();
        if let Some(&(_, v)) = f.approximated.iter().find(|&&(_, v)| v - log_eta > -40.0) {
            return Err(Error::NonConvergence {
                subdivisions: 200,
                estimate: (v - log_eta).exp(),
                error: f64::NAN,
            });
        }
    }
    Ok(())
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `f(μ, σ | x) = ζ(μ, σ) ∏ f(xᵢ | μ, σ) / η` for a joint location-scale
/// family.
pub fn build_posterior_2d(
    fam: &DirectFamily<f64>,
    zeta: &ConsistencyFactor,
    data: &[f64],
    opts: &PosteriorOptions,
) -> Result<Posterior2D> {
    let ls = fam
        .as_location_scale()
        .filter(|ls| ls.pin() == Pin::Joint)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "family '{}' is not a joint location-scale family",
                fam.label()
            ))
        })?;
    check_data(fam, data)?;
    if data.len() < 2 {
        return Err(Error::PosteriorNotNormalizable {
            reason: format!(
                "{} observation(s): η diverges for a joint location-scale posterior",
                data.len()
            ),
        });
    }
    let base = Arc::clone(ls.base());
    let z = zeta.clone();
    let xs = data.to_vec();
    let g: LogFn2 = Arc::new(move |mu: f64, sigma: f64| {
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let ls = sigma.ln();
        xs.iter()
            .map(|&x| base.ln_pdf((x - mu) / sigma) - ls)
            .sum::<f64>()
            + z.ln_zeta(&[mu, sigma])
    });
    let xbar = data.iter().sum::<f64>() / data.len() as f64;
    let spread = rms_about(data, xbar);
    let prov = |what: &str| Provenance {
        family: format!("{}|{what}", fam.label()),
        factor: zeta.label().to_string(),
        data: data.to_vec(),
    };

    let (gm, fail_m) = {
        let g = Arc::clone(&g);
        let xs = data.to_vec();
        guarded(move |mu| ln_integral_over_sigma(&g, mu, rms_about(&xs, mu)))
    };
    let marginal_mu = Posterior::from_log_density(
        gm,
        Interval::real_line(),
        Some(xbar),
        opts,
        prov("marginal-mu"),
    );
    check_inner(&fail_m, &marginal_mu)?;
    let marginal_mu = marginal_mu?;

    let (gs, fail_s) = {
        let g = Arc::clone(&g);
        guarded(move |sigma| ln_integral_over_mu(&g, sigma, xbar))
    };
    let marginal_sigma = Posterior::from_log_density(
        gs,
        Interval::positive(),
        Some(spread),
        opts,
        prov("marginal-sigma"),
    );
    check_inner(&fail_s, &marginal_sigma)?;
    let marginal_sigma = marginal_sigma?;

    let log_eta = marginal_mu.log_eta();
    let lo = marginal_mu.quantile(1e-3)?;
    let hi = marginal_mu.quantile(1.0 - 1e-3)?;
    let mu_grid: Vec<f64> = (0..GRID_SIDE)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_SIDE - 1) as f64)
        .collect();
    let sigma_grid = log_space(
        marginal_sigma.quantile(1e-3)?,
        marginal_sigma.quantile(1.0 - 1e-3)?,
        GRID_SIDE,
    );
    let density_grid = mu_grid
        .iter()
        .map(|&m| {
            sigma_grid
                .iter()
                .map(|&s| (g(m, s) - log_eta).exp())
                .collect()
        })
        .collect();
    Ok(Posterior2D {
        g,
        family: fam.label().to_string(),
        factor: zeta.label().to_string(),
        data: data.to_vec(),
        log_eta,
        marginal_mu,
        marginal_sigma,
        mu_grid,
        sigma_grid,
        density_grid,
        opts: *opts,
    })
}

impl Posterior2D {
    pub fn log_eta(&self) -> f64 {
        self.log_eta
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn ln_density(&self, mu: f64, sigma: f64) -> f64 {
        (self.g)(mu, sigma) - self.log_eta
    }

    pub fn density(&self, mu: f64, sigma: f64) -> f64 {
        self.ln_density(mu, sigma).exp()
    }

    pub fn mu_grid(&self) -> &[f64] {
        &self.mu_grid
    }

    pub fn sigma_grid(&self) -> &[f64] {
        &self.sigma_grid
    }

    /// `density_grid()[i][j]` is the density at `(mu_grid[i], sigma_grid[j])`.
    pub fn density_grid(&self) -> &[Vec<f64>] {
        &self.density_grid
    }

    pub fn to_record(&self) -> Posterior2DRecord {
        Posterior2DRecord {
            family: self.family.clone(),
            factor: self.factor.clone(),
            data: self.data.clone(),
            mu: self.mu_grid.clone(),
            sigma: self.sigma_grid.clone(),
            density: self.density_grid.clone(),
            log_eta: self.log_eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior2DRecord {
    pub family: String,
    pub factor: String,
    pub data: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    pub log_eta: f64,
}

pub fn marginalize(post: &Posterior2D, component: Component) -> Posterior {
    match component {
        Component::Mu => post.marginal_mu.clone(),
        Component::Sigma => post.marginal_sigma.clone(),
    }
}

/// `f(σ | μ, x)` or `f(μ | σ, x)` as the joint slice over the marginal.
pub fn conditional_from_joint(post: &Posterior2D, fix: Component, value: f64) -> Result<Posterior> {
    let marginal = match fix {
        Component::Mu => &post.marginal_mu,
        Component::Sigma => &post.marginal_sigma,
    };
    let m = marginal.density(value);
    if !(m >= ZERO_MARGINAL) {
        return Err(Error::ZeroMarginal { value });
    }
    let g = Arc::clone(&post.g);
    let log_eta = post.log_eta;
    let lm = marginal.ln_density(value);
    let prov = Provenance {
        family: format!("{}|{:?}={value}", post.family, fix),
        factor: post.factor.clone(),
        data: post.data.clone(),
    };
    let (slice, domain, start): (LogFn, _, _) = match fix {
        Component::Mu => (
            Arc::new(move |s| g(value, s) - log_eta - lm),
            Interval::positive(),
            rms_about(&post.data, value),
        ),
        Component::Sigma => (
            Arc::new(move |m| g(m, value) - log_eta - lm),
            Interval::real_line(),
            post.marginal_mu.mode(),
        ),
    };
    Posterior::from_log_density(slice, domain, Some(start), &post.opts, prov)
}

/// `max |f(μ, σ | x) − f(σ | μ, x) f(μ | x)|` on a probe grid, where
/// `f(σ | μ, x)` is built on its own from the μ-pinned scale family with
/// `ζ = σ⁻¹` and `f(μ | x)` is the joint's marginal.
pub fn product_rule_residual(
    fam: &DirectFamily<f64>,
    joint_factor: &ConsistencyFactor,
    data: &[f64],
    opts: &PosteriorOptions,
) -> Result<f64> {
    let joint = build_posterior_2d(fam, joint_factor, data, opts)?;
    let ls = fam
        .as_location_scale()
        .expect("checked by build_posterior_2d");
    let scale_factor = consistency_factor(FactorKind::Scale)?;
    let marg = &joint.marginal_mu;
    let k = 21;
    let sigmas = log_space(
        joint.marginal_sigma.quantile(0.05)?,
        joint.marginal_sigma.quantile(0.95)?,
        k,
    );
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let mu = marg.quantile(0.05 + 0.9 * i as f64 / (k - 1) as f64)?;
        let pinned = DirectFamily::new(ls.repinned(Pin::Location(mu)));
        let cond = build_posterior(&pinned, &scale_factor, data, FactorMode::Strict, opts)?;
        let fm = marg.density(mu);
        for &s in &sigmas {
            worst = worst.max((joint.density(mu, s) - cond.density(s) * fm).abs());
        }
    }
    Ok(worst)
}
