use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    build_grid, expand_bracket, find_root, gauss_legendre, integrate_with, local_scale, maximize,
    GaussLegendre, Hint, Interval, MonotoneCubic, Tolerance,
};

pub(crate) type LogFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Density values below `peak · 1e-12` lie outside the node grid; their
/// mass is picked up by improper quadrature.
const LOG_CUT: f64 = 27.631_021_115_928_547;

fn gl8() -> &'static GaussLegendre<f64> {
    static RULE: OnceLock<GaussLegendre<f64>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

/// Working coordinate `w` in which grids are laid out: `θ` itself, or a
/// logarithm of the distance to a single finite end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Coordinate {
    Linear,
    LogAbove { lo: f64 },
    LogBelow { hi: f64 },
}

impl Coordinate {
    pub fn for_domain(d: Interval<f64>) -> Self {
        match (d.lo.is_finite(), d.hi.is_finite()) {
            (true, false) => Coordinate::LogAbove { lo: d.lo },
            (false, true) => Coordinate::LogBelow { hi: d.hi },
            _ => Coordinate::Linear,
        }
    }

    pub fn theta(&self, w: f64) -> f64 {
        match *self {
            Coordinate::Linear => w,
            Coordinate::LogAbove { lo } => lo + w.exp(),
            Coordinate::LogBelow { hi } => hi - (-w).exp(),
        }
    }

    pub fn w(&self, theta: f64) -> f64 {
        match *self {
            Coordinate::Linear => theta,
            Coordinate::LogAbove { lo } => (theta - lo).ln(),
            Coordinate::LogBelow { hi } => -(hi - theta).ln(),
        }
    }

    /// `ln dθ/dw`.
    pub fn ln_jacobian(&self, w: f64) -> f64 {
        match *self {
            Coordinate::Linear => 0.0,
            Coordinate::LogAbove { .. } => w,
            Coordinate::LogBelow { .. } => -w,
        }
    }

    fn w_domain(&self, d: Interval<f64>) -> Interval<f64> {
        match self {
            Coordinate::Linear => d,
            _ => Interval::real_line(),
        }
    }
}

/// Where a posterior came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub family: String,
    pub factor: String,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct PosteriorOptions {
    /// Grid nodes between the density cut points.
    pub nodes: usize,
    pub tol: Tolerance<f64>,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        Self {
            nodes: 1024,
            tol: Tolerance::default()
                .with_rel(1e-10)
                .with_abs(1e-14)
                .with_subdivisions(200),
        }
    }
}

impl PosteriorOptions {
    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes.max(8);
        self
    }
}

/// A normalized density over a one-dimensional parameter, stored on a grid
/// of nodes. When built from a likelihood the exact log-density is kept and
/// the grid only organizes quadrature; a posterior read back from a record
/// interpolates the stored log-density monotonically.
#[derive(Clone)]
pub struct Posterior {
    domain: Interval<f64>,
    coord: Coordinate,
    w_nodes: Vec<f64>,
    nodes: Vec<f64>,
    log_density: Vec<f64>,
    cum: Vec<f64>,
    log_norm: f64,
    log_eta: f64,
    mode_w: f64,
    mode: f64,
    scale_w: f64,
    g: LogFn,
    exact: bool,
    tol: Tolerance<f64>,
    provenance: Provenance,
}

impl fmt::Debug for Posterior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Posterior")
            .field("domain", &self.domain)
            .field("nodes", &self.nodes.len())
            .field("log_eta", &self.log_eta)
            .field("provenance", &self.provenance)
            .finish()
    }
}

fn not_normalizable(reason: impl Into<String>) -> Error {
    Error::PosteriorNotNormalizable {
        reason: reason.into(),
    }
}

fn tail_error(e: Error) -> Error {
    match e {
        Error::NonConvergence { .. } | Error::NonFinite { .. } => {
            not_normalizable(format!("tail integral failed: {e}"))
        }
        other => other,
    }
}

impl Posterior {
    /// Normalizes `exp(g)` over `domain`. `start` is an optional guess for
    /// the location of the mass.
    pub(crate) fn from_log_density(
        g: LogFn,
        domain: Interval<f64>,
        start: Option<f64>,
        opts: &PosteriorOptions,
        provenance: Provenance,
    ) -> Result<Self> {
        let coord = Coordinate::for_domain(domain);
        let wd = coord.w_domain(domain);
        let h = |w: f64| {
            let v = g(coord.theta(w)) + coord.ln_jacobian(w);
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        };

        // coarse scan for a starting point
        let scan: Vec<f64> = build_grid(wd, 129, None)
            .into_iter()
            .filter(|&w| wd.interior(w))
            .collect();
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, &w) in scan.iter().enumerate() {
            let v = h(w);
            if v > best.map_or(f64::NEG_INFINITY, |b| b.1) {
                let lo = if i > 0 { scan[i - 1] } else { w - 1.0 };
                let hi = if i + 1 < scan.len() {
                    scan[i + 1]
                } else {
                    w + 1.0
                };
                best = Some((w, v, 0.25 * (hi - lo).abs()));
            }
        }
        if let Some(s) = start {
            let w = coord.w(s);
            let v = if wd.interior(w) {
                h(w)
            } else {
                f64::NEG_INFINITY
            };
            // a data-driven guess wins unless the scan found clearly more mass
            if v.is_finite() && best.is_none_or(|b| v >= b.1 - 1.0) {
                let step = best.map_or(0.1 * w.abs().max(1.0), |b| b.2);
                best = Some((w, v, step));
            }
        }
        let (w0, _, step) = match best {
            Some(b) if b.1 > f64::NEG_INFINITY => b,
            _ => return Err(not_normalizable("density vanishes on every probe point")),
        };
        if best.is_some_and(|b| b.1 == f64::INFINITY) {
            return Err(not_normalizable("density is unbounded"));
        }
        let (mode_w, peak) = maximize(h, wd, w0, step)?;
        if !peak.is_finite() {
            return Err(not_normalizable(format!("log-density peak is {peak}")));
        }
        let scale_w = local_scale(&h, mode_w, peak, &wd, step);

        let cut = |dir: f64| -> Result<f64> {
            let edge = if dir > 0.0 { wd.hi } else { wd.lo };
            let mut inside = mode_w;
            let mut d = scale_w;
            for _ in 0..1100 {
                let w = mode_w + dir * d;
                if (dir > 0.0 && w >= edge) || (dir < 0.0 && w <= edge) {
                    if edge.is_finite() {
                        return Ok(edge);
                    }
                    break;
                }
                if !coord.theta(w).is_finite() {
                    // θ overflowed before the density decayed
                    break;
                }
                if h(w) < peak - LOG_CUT {
                    let (mut a, mut b) = (inside, w);
                    for _ in 0..200 {
                        let m = 0.5 * (a + b);
                        if m == a || m == b {
                            break;
                        }
                        if h(m) < peak - LOG_CUT {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                    return Ok(b);
                }
                inside = w;
                d *= 2.0;
                if !d.is_finite() {
                    break;
                }
            }
            Err(not_normalizable(
                "density does not decay towards an infinite end",
            ))
        };
        let w_lo = cut(-1.0)?;
        let w_hi = cut(1.0)?;
        let n = opts.nodes.max(8);
        let a = scale_w.max(1e-300);
        let (u_lo, u_hi) = (((w_lo - mode_w) / a).asinh(), ((w_hi - mode_w) / a).asinh());
        let mut w_nodes: Vec<f64> = (0..n)
            .map(|i| mode_w + a * (u_lo + (u_hi - u_lo) * i as f64 / (n - 1) as f64).sinh())
            .collect();
        w_nodes[0] = w_lo;
        w_nodes[n - 1] = w_hi;
        w_nodes.dedup();
        if w_nodes.len() < 2 {
            return Err(not_normalizable("posterior collapsed to a point"));
        }
        let log_density: Vec<f64> = w_nodes.iter().map(|&w| g(coord.theta(w))).collect();
        Self::assemble(
            g,
            domain,
            coord,
            w_nodes,
            log_density,
            mode_w,
            peak,
            scale_w,
            true,
            opts.tol,
            provenance,
        )
    }

    /// Computes cell masses and the cumulative distribution on the given
    /// nodes. `log_density` holds unnormalized values; they are shifted by
    /// the normalizer before being stored.
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        g: LogFn,
        domain: Interval<f64>,
        coord: Coordinate,
        w_nodes: Vec<f64>,
        mut log_density: Vec<f64>,
        mode_w: f64,
        peak: f64,
        scale_w: f64,
        exact: bool,
        tol: Tolerance<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let wd = coord.w_domain(domain);
        let rel = |w: f64| {
            let v = g(coord.theta(w)) + coord.ln_jacobian(w) - peak;
            if v.is_nan() {
                0.0
            } else {
                v.exp()
            }
        };
        let rule = gl8();
        let n = w_nodes.len();
        let mut cells = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            cells.push(rule.integrate(rel, w_nodes[i], w_nodes[i + 1]));
        }
        let tail = |from: f64, to: f64| -> Result<f64> {
            if from == to {
                return Ok(0.0);
            }
            let (lo, hi) = if from < to { (from, to) } else { (to, from) };
            let hint = Hint {
                center: from,
                scale: scale_w.max((from - mode_w).abs()),
            };
            integrate_with(rel, Interval::new(lo, hi)?, hint, &tol).map_err(tail_error)
        };
        let left = tail(w_nodes[0], wd.lo)?;
        let right = tail(w_nodes[n - 1], wd.hi)?;
        let total = left + cells.iter().sum::<f64>() + right;
        if !(total > 0.0) || !total.is_finite() {
            return Err(not_normalizable(format!(
                "normalization integral is {total}"
            )));
        }
        let mut cum = Vec::with_capacity(n);
        let mut acc = left;
        cum.push(acc / total);
        for c in &cells {
            acc += c;
            cum.push((acc / total).min(1.0));
        }
        let log_norm = peak + total.ln();
        for v in log_density.iter_mut() {
            *v -= log_norm;
        }
        let nodes = w_nodes.iter().map(|&w| coord.theta(w)).collect();
        // the density mode in θ differs from the mode in w by the Jacobian
        let mode = match coord {
            Coordinate::Linear => coord.theta(mode_w),
            _ => {
                let gt = |w: f64| g(coord.theta(w));
                match maximize(gt, wd, mode_w, scale_w) {
                    Ok((w, _)) => coord.theta(w),
                    Err(_) => domain.lo.max(domain.hi.min(coord.theta(mode_w))),
                }
            }
        };
        Ok(Self {
            domain,
            coord,
            w_nodes,
            nodes,
            log_density,
            cum,
            log_norm,
            log_eta: log_norm,
            mode_w,
            mode,
            scale_w,
            g,
            exact,
            tol,
            provenance,
        })
    }

    pub fn domain(&self) -> Interval<f64> {
        self.domain
    }

    pub fn coordinate(&self) -> Coordinate {
        self.coord
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Normalized log-density at the nodes.
    pub fn log_densities(&self) -> &[f64] {
        &self.log_density
    }

    /// Normalized cdf at the nodes.
    pub fn cdf_nodes(&self) -> &[f64] {
        &self.cum
    }

    /// `ln η`, the log of the normalization factor `∫ ζ ∏ f dθ`.
    pub fn log_eta(&self) -> f64 {
        self.log_eta
    }

    pub(crate) fn with_log_eta(mut self, log_eta: f64) -> Self {
        self.log_eta = log_eta;
        self
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    /// Whether density values come from the closed-form log-likelihood
    /// rather than interpolation.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Location of the density maximum in `θ`. For an unbounded density
    /// this is the end it diverges at.
    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn ln_density(&self, theta: f64) -> f64 {
        if !self.domain.interior(theta) {
            return f64::NEG_INFINITY;
        }
        let v = (self.g)(theta) - self.log_norm;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub fn density(&self, theta: f64) -> f64 {
        self.ln_density(theta).exp()
    }

    /// Mass per unit `w`.
    fn w_density(&self, w: f64) -> f64 {
        let v = (self.g)(self.coord.theta(w)) + self.coord.ln_jacobian(w) - self.log_norm;
        if v.is_nan() {
            0.0
        } else {
            v.exp()
        }
    }

    fn tail_integral(&self, f: impl Fn(f64) -> f64, from: f64, to: f64) -> Result<f64> {
        if from == to {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if from < to {
            (from, to, 1.0)
        } else {
            (to, from, -1.0)
        };
        let hint = Hint {
            center: from,
            scale: self.scale_w.max((from - self.mode_w).abs()),
        };
        let v = integrate_with(f, Interval::new(lo, hi)?, hint, &self.tol)?;
        Ok(sign * v)
    }

    fn cdf_w(&self, w: f64) -> f64 {
        let n = self.w_nodes.len();
        let wd = self.coord.w_domain(self.domain);
        if w <= wd.lo {
            return 0.0;
        }
        if w >= wd.hi {
            return 1.0;
        }
        let f = |v: f64| self.w_density(v);
        if w < self.w_nodes[0] {
            return self
                .tail_integral(f, w, wd.lo)
                .map(|v| -v)
                .unwrap_or(f64::NAN)
                .clamp(0.0, 1.0);
        }
        if w > self.w_nodes[n - 1] {
            return (1.0 - self.tail_integral(f, w, wd.hi).unwrap_or(f64::NAN)).clamp(0.0, 1.0);
        }
        let i = match self.w_nodes.partition_point(|&v| v <= w) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        (self.cum[i] + gl8().integrate(f, self.w_nodes[i], w)).clamp(0.0, 1.0)
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= self.domain.lo {
            return 0.0;
        }
        if theta >= self.domain.hi {
            return 1.0;
        }
        self.cdf_w(self.coord.w(theta))
    }

    /// Inverse of [`Posterior::cdf`]; `p = 0` and `p = 1` give the ends of
    /// the parameter space.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        if p == 0.0 {
            return Ok(self.domain.lo);
        }
        if p == 1.0 {
            return Ok(self.domain.hi);
        }
        let n = self.w_nodes.len();
        let g = |w: f64| self.cdf_w(w) - p;
        let tol = Tolerance::default().with_rel(1e-15).with_abs(1e-16);
        let bracket = if p >= self.cum[0] && p <= self.cum[n - 1] {
            let k = self.cum.partition_point(|&c| c < p).clamp(1, n - 1);
            Interval::new(self.w_nodes[k - 1], self.w_nodes[k])?
        } else {
            let start = if p < self.cum[0] {
                self.w_nodes[0]
            } else {
                self.w_nodes[n - 1]
            };
            expand_bracket(g, start, self.scale_w, self.coord.w_domain(self.domain))?
        };
        let w = find_root(g, bracket, &tol)?;
        Ok(self.coord.theta(w))
    }

    /// `E[f(θ)]` under the posterior.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let integrand = |w: f64| {
            let d = self.w_density(w);
            if d == 0.0 {
                0.0
            } else {
                f(self.coord.theta(w)) * d
            }
        };
        let rule = gl8();
        let n = self.w_nodes.len();
        let wd = self.coord.w_domain(self.domain);
        let mut acc = 0.0;
        for i in 0..n - 1 {
            acc += rule.integrate(integrand, self.w_nodes[i], self.w_nodes[i + 1]);
        }
        acc -= self.tail_integral(integrand, self.w_nodes[0], wd.lo)?;
        acc += self.tail_integral(integrand, self.w_nodes[n - 1], wd.hi)?;
        Ok(acc)
    }

    pub fn mean(&self) -> Result<f64> {
        self.expect(|t| t)
    }

    /// Serializable snapshot of the grid.
    pub fn to_record(&self) -> PosteriorRecord {
        PosteriorRecord {
            family: self.provenance.family.clone(),
            factor: self.provenance.factor.clone(),
            data: self.provenance.data.clone(),
            coordinate: self.coord,
            param_lo: self.domain.lo.is_finite().then_some(self.domain.lo),
            param_hi: self.domain.hi.is_finite().then_some(self.domain.hi),
            nodes: self.nodes.clone(),
            log_density: self
                .log_density
                .iter()
                .map(|&v| v.is_finite().then_some(v))
                .collect(),
            log_eta: self.log_eta,
        }
    }

    /// Rebuilds a posterior from a record by monotone interpolation of the
    /// stored log-density in the working coordinate. Nodes and values are
    /// kept as written.
    pub fn from_record(rec: &PosteriorRecord) -> Result<Self> {
        let domain = Interval::new(
            rec.param_lo.unwrap_or(f64::NEG_INFINITY),
            rec.param_hi.unwrap_or(f64::INFINITY),
        )?;
        let coord = Coordinate::for_domain(domain);
        if coord != rec.coordinate {
            return Err(Error::Serialization(format!(
                "coordinate {:?} does not match parameter space",
                rec.coordinate
            )));
        }
        if rec.nodes.len() < 2 || rec.nodes.len() != rec.log_density.len() {
            return Err(Error::Serialization(
                "nodes and log_density must have equal length ≥ 2".to_string(),
            ));
        }
        let w_nodes: Vec<f64> = rec.nodes.iter().map(|&t| coord.w(t)).collect();
        if w_nodes.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::Serialization("nodes must increase".to_string()));
        }
        let stored: Vec<f64> = rec
            .log_density
            .iter()
            .map(|v| v.unwrap_or(f64::NEG_INFINITY))
            .collect();
        let floor = stored
            .iter()
            .cloned()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min)
            - 745.0;
        if !floor.is_finite() {
            return Err(Error::Serialization(
                "log_density has no finite value".to_string(),
            ));
        }
        let ys: Vec<f64> = stored.iter().map(|&v| v.max(floor)).collect();
        let (imax, peak) =
            ys.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |b, (i, &v)| if v > b.1 { (i, v) } else { b },
            );
        let interp = MonotoneCubic::new(w_nodes.clone(), ys);
        let g: LogFn = Arc::new(move |t: f64| interp.eval(coord.w(t)));
        let mode_w = w_nodes[imax];
        let span = w_nodes[w_nodes.len() - 1] - w_nodes[0];
        let mut post = Self::assemble(
            Arc::clone(&g),
            domain,
            coord,
            w_nodes.clone(),
            stored.clone(),
            mode_w,
            peak + coord.ln_jacobian(mode_w),
            span / 16.0,
            false,
            PosteriorOptions::default().tol,
            Provenance {
                family: rec.family.clone(),
                factor: rec.factor.clone(),
                data: rec.data.clone(),
            },
        )?;
        // keep the stored values bit for bit; the interpolant is already
        // normalized up to quadrature error
        post.log_density = stored;
        post.nodes = rec.nodes.clone();
        post.log_eta = rec.log_eta;
        Ok(post)
    }
}

/// JSON form of a [`Posterior`]. Infinite parameter ends and zero
/// densities are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub family: String,
    pub factor: String,
    pub data: Vec<f64>,
    pub coordinate: Coordinate,
    pub param_lo: Option<f64>,
    pub param_hi: Option<f64>,
    pub nodes: Vec<f64>,
    pub log_density: Vec<Option<f64>>,
    pub log_eta: f64,
}

impl PosteriorRecord {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}
