//! Confidence intervals, the fiducial condition and Monte Carlo calibration
//! of inverse distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::families::DirectFamily;
use crate::numerics::{central_diff, RandomStream};
use crate::posterior::{
    build_posterior, check_factor, predictive_density, ConsistencyFactor, FactorMode, Posterior,
    PosteriorOptions,
};

/// `(θ₁, θ₂)` with posterior mass `α` below `θ₁` and `δ` between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub theta1: f64,
    pub theta2: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl ConfidenceInterval {
    /// Open-interval membership.
    pub fn covers(&self, theta: f64) -> bool {
        self.theta1 < theta && theta < self.theta2
    }
}

fn check_probabilities(alpha: f64, delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta = {delta} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0 - delta).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} outside [0, 1 - delta] = [0, {}]",
            1.0 - delta
        )));
    }
    Ok(())
}

pub fn confidence_interval(post: &Posterior, alpha: f64, delta: f64) -> Result<ConfidenceInterval> {
    check_probabilities(alpha, delta)?;
    let theta1 = post.quantile(alpha)?;
    let theta2 = post.quantile((alpha + delta).min(1.0))?;
    Ok(ConfidenceInterval {
        theta1,
        theta2,
        alpha,
        delta,
    })
}

/// `max |f(λ | x) − |∂_λ F(x | λ)||` over `grid`, the derivative taken by
/// central differences.
pub fn fiducial_residual_with(
    post: &Posterior,
    cdf_in_param: impl Fn(f64) -> f64,
    grid: &[f64],
) -> Result<f64> {
    let mut sign = 0.0;
    let mut worst: f64 = 0.0;
    for &l in grid {
        let d = central_diff(&cdf_in_param, l);
        if !d.is_finite() {
            return Err(Error::NonFinite { at: l });
        }
        if d != 0.0 {
            if sign != 0.0 && d.signum() != sign {
                return Err(Error::NonMonotoneInParameter { at: l });
            }
            sign = d.signum();
        }
        worst = worst.max((post.density(l) - d.abs()).abs());
    }
    Ok(worst)
}

/// Builds the posterior from the single observation `x` and compares it
/// with `|∂_λ F(x | λ)|`.
pub fn fiducial_residual(
    fam: &DirectFamily<f64>,
    zeta: &ConsistencyFactor,
    x: f64,
    grid: &[f64],
) -> Result<f64> {
    let post = build_posterior(
        fam,
        zeta,
        &[x],
        FactorMode::Unchecked,
        &PosteriorOptions::default(),
    )?;
    fiducial_residual_with(&post, |l| fam.cdf(x, &[l]), grid)
}

/// Source of the true parameter in each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Truth {
    Fixed {
        value: f64,
    },
    /// Trial `i` uses `values[i % len]`.
    Cycle {
        values: Vec<f64>,
    },
    /// Drawn from the trial's own stream.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl Truth {
    pub fn draw(&self, index: usize, stream: &mut RandomStream) -> f64 {
        match self {
            Truth::Fixed { value } => *value,
            Truth::Cycle { values } => values[index % values.len()],
            Truth::Uniform { lo, hi } => lo + (hi - lo) * stream.uniform(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Truth::Cycle { values } if values.is_empty() => Err(Error::InvalidArgument(
                "cycle truth needs at least one value".to_string(),
            )),
            Truth::Uniform { lo, hi } if !(lo < hi) => Err(Error::InvalidArgument(format!(
                "uniform truth needs lo < hi, got [{lo}, {hi}]"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub alpha: f64,
    pub delta: f64,
    pub trials: usize,
    pub n_obs: usize,
    pub seed: u64,
    /// Trial `i` draws from stream `base_id · trials + i`.
    pub base_id: u64,
    /// Posterior grid size per trial.
    pub nodes: usize,
    /// Record failed builds and continue instead of failing the run.
    pub allow_failures: bool,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            delta: 0.9,
            trials: 10_000,
            n_obs: 1,
            seed: 0,
            base_id: 0,
            nodes: 256,
            allow_failures: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub trials: usize,
    pub covered: usize,
    pub failed_trials: usize,
    pub coverage: f64,
    pub target_delta: f64,
    pub std_error: f64,
    pub seed: u64,
    pub config_echo: serde_json::Value,
}

/// 17 significant digits in scientific notation, enough for any `f64` to
/// parse back to the same bits.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl CalibrationReport {
    pub const CSV_HEADER: &'static str = "trials,covered,coverage,target,std_error,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.trials,
            self.covered,
            format_real(self.coverage),
            format_real(self.target_delta),
            format_real(self.std_error),
            self.seed
        )
    }
}

fn stream_for(seed: u64, base_id: u64, trials: usize, index: usize) -> RandomStream {
    RandomStream::new(
        seed,
        base_id
            .wrapping_mul(trials as u64)
            .wrapping_add(index as u64),
    )
}

fn check_one_dimensional(fam: &DirectFamily<f64>) -> Result<()> {
    if fam.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "calibration runs need a one-parameter family; '{}' has {}",
            fam.label(),
            fam.dim()
        )));
    }
    Ok(())
}

/// Repeats: draw `θ`, sample `n_obs` observations, build the posterior,
/// form the `(α, δ)` interval and record whether it covers `θ`. Trials are
/// independent and run in parallel; each owns a derived random stream so
/// the report does not depend on scheduling.
pub fn coverage_experiment(
    fam: &DirectFamily<f64>,
    zeta: &ConsistencyFactor,
    truth: &Truth,
    cfg: &CoverageConfig,
    mode: FactorMode,
) -> Result<CalibrationReport> {
    check_one_dimensional(fam)?;
    check_probabilities(cfg.alpha, cfg.delta)?;
    truth.validate()?;
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument(
            "trials must be at least 1".to_string(),
        ));
    }
    if cfg.n_obs == 0 {
        return Err(Error::InvalidArgument(
            "n_obs must be at least 1".to_string(),
        ));
    }
    // the factor is validated once; trials then build unchecked
    check_factor(fam, zeta, mode)?;
    let opts = PosteriorOptions::default().with_nodes(cfg.nodes);
    let outcomes: Vec<Result<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut stream = stream_for(cfg.seed, cfg.base_id, cfg.trials, i);
            let theta = truth.draw(i, &mut stream);
            let data = (0..cfg.n_obs)
                .map(|_| fam.sample(&[theta], &mut stream))
                .collect::<Result<Vec<f64>>>()?;
            let post = build_posterior(fam, zeta, &data, FactorMode::Unchecked, &opts)?;
            Ok(confidence_interval(&post, cfg.alpha, cfg.delta)?.covers(theta))
        })
        .collect();
    let mut covered = 0;
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(true) => covered += 1,
            Ok(false) => {}
            Err(e) if !cfg.allow_failures => return Err(e),
            Err(_) => failed += 1,
        }
    }
    let d = cfg.delta;
    Ok(CalibrationReport {
        trials: cfg.trials,
        covered,
        failed_trials: failed,
        coverage: covered as f64 / cfg.trials as f64,
        target_delta: d,
        std_error: (d * (1.0 - d) / cfg.trials as f64).sqrt(),
        seed: cfg.seed,
        config_echo: json!({
            "family": fam.label(),
            "factor": zeta.label(),
            "truth": truth,
            "config": cfg,
        }),
    })
}

/// Coverage of the central intervals `α = (1 − δ)/2` for each `δ` in
/// `deltas`, all from the same trials and posteriors.
pub fn coverage_curve(
    fam: &DirectFamily<f64>,
    zeta: &ConsistencyFactor,
    truth: &Truth,
    cfg: &CoverageConfig,
    mode: FactorMode,
    deltas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_one_dimensional(fam)?;
    truth.validate()?;
    for &d in deltas {
        check_probabilities(0.5 * (1.0 - d), d)?;
    }
    if cfg.trials == 0 || cfg.n_obs == 0 {
        return Err(Error::InvalidArgument(
            "trials and n_obs must be at least 1".to_string(),
        ));
    }
    check_factor(fam, zeta, mode)?;
    let opts = PosteriorOptions::default().with_nodes(cfg.nodes);
    let hits: Vec<Result<Vec<bool>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut stream = stream_for(cfg.seed, cfg.base_id, cfg.trials, i);
            let theta = truth.draw(i, &mut stream);
            let data = (0..cfg.n_obs)
                .map(|_| fam.sample(&[theta], &mut stream))
                .collect::<Result<Vec<f64>>>()?;
            let post = build_posterior(fam, zeta, &data, FactorMode::Unchecked, &opts)?;
            deltas
                .iter()
                .map(|&d| Ok(confidence_interval(&post, 0.5 * (1.0 - d), d)?.covers(theta)))
                .collect()
        })
        .collect();
    let mut counts = vec![0usize; deltas.len()];
    let mut used = 0usize;
    for h in hits {
        match h {
            Ok(v) => {
                used += 1;
                for (c, hit) in counts.iter_mut().zip(v) {
                    *c += hit as usize;
                }
            }
            Err(e) if !cfg.allow_failures => return Err(e),
            Err(_) => {}
        }
    }
    if used == 0 {
        return Err(Error::FailedTrials(cfg.trials));
    }
    Ok(deltas
        .iter()
        .zip(counts)
        .map(|(&d, c)| (d, c as f64 / used as f64))
        .collect())
}

/// Where the predictive cdf for the second observation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictiveSource {
    /// The posterior predictive from the first observation.
    Posterior,
    /// The direct cdf at the true parameter.
    PointMassAtTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitReport {
    pub trials: usize,
    pub ks_statistic: f64,
    /// `1.63 / √trials`, the asymptotic 1 % critical value.
    pub critical_1pct: f64,
    pub seed: u64,
}

/// Kolmogorov–Smirnov distance of a sample from the uniform distribution.
pub fn ks_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (hi - u).max(u - lo)
        })
        .fold(0.0, f64::max)
}

/// Per trial: draw `x₁`, build the posterior, draw `x₂` and evaluate the
/// predictive cdf at `x₂`. Calibrated predictives give uniform values.
pub fn predictive_pit_check(
    fam: &DirectFamily<f64>,
    zeta: &ConsistencyFactor,
    truth: f64,
    cfg: &CoverageConfig,
    source: PredictiveSource,
) -> Result<PitReport> {
    check_one_dimensional(fam)?;
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument(
            "trials must be at least 1".to_string(),
        ));
    }
    let opts = PosteriorOptions::default().with_nodes(cfg.nodes);
    let values: Vec<Result<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut stream = stream_for(cfg.seed, cfg.base_id, cfg.trials, i);
            let x1 = fam.sample(&[truth], &mut stream)?;
            let x2 = fam.sample(&[truth], &mut stream)?;
            match source {
                PredictiveSource::PointMassAtTruth => Ok(fam.cdf(x2, &[truth])),
                PredictiveSource::Posterior => {
                    let post = build_posterior(fam, zeta, &[x1], FactorMode::Unchecked, &opts)?;
                    predictive_density(&post, fam).cdf(x2)
                }
            }
        })
        .collect();
    let mut us = Vec::with_capacity(cfg.trials);
    for v in values {
        match v {
            Ok(u) => us.push(u),
            Err(e) if !cfg.allow_failures => return Err(e),
            Err(_) => {}
        }
    }
    if us.is_empty() {
        return Err(Error::FailedTrials(cfg.trials));
    }
    Ok(PitReport {
        trials: us.len(),
        ks_statistic: ks_uniform(&mut us),
        critical_1pct: 1.63 / (us.len() as f64).sqrt(),
        seed: cfg.seed,
    })
}
