//! Dispatches a validated config to the library and writes the outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use infer_core::calibration::{
    confidence_interval, coverage_curve, coverage_experiment, fiducial_residual_with, format_real,
    predictive_pit_check, CalibrationReport, CoverageConfig, Truth,
};
use infer_core::families::{self, Pin};
use infer_core::invariance::{check_h_form, lookup_group, reduction_maps};
use infer_core::numerics::RandomStream;
use infer_core::posterior::{
    build_posterior, build_posterior_2d, marginalize, Component, FactorMode, Posterior,
    PosteriorOptions,
};
use infer_core::rivals::compare_rules;
use infer_core::{Error, Family};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, DataSpec, ExperimentConfig, FieldError, GridSpec, Spacing};
use crate::factors;
use crate::plot::{line_chart, Series};

/// Stream id reserved for generated data, apart from the trial streams.
const DATA_STREAM: u64 = u64::MAX;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<FieldError>),
    #[error("{module}: {source}")]
    Library { module: &'static str, source: Error },
    #[error("i/o: {0}")]
    Io(String),
}

impl RunError {
    /// 2 config, 3 numerical or model failure, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Library {
                source: Error::InvalidArgument(_),
                ..
            } => 2,
            RunError::Library {
                source: Error::Serialization(_),
                ..
            } => 4,
            RunError::Library { .. } => 3,
            RunError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_echo: Value,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub output_files: Vec<String>,
}

/// Files produced by a command before they are written.
struct Outputs {
    json: Value,
    csv: String,
    plot: Option<Result<String, String>>,
}

fn lib(module: &'static str) -> impl Fn(Error) -> RunError {
    move |source| RunError::Library { module, source }
}

/// Writes through a temporary sibling and renames, so a reader never sees
/// a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.into_iter().map(format_real).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn resolve_data(cfg: &ExperimentConfig, fam: &Family) -> Result<Vec<f64>, RunError> {
    match &cfg.data {
        None => Ok(Vec::new()),
        Some(DataSpec::Values(v)) => Ok(v.clone()),
        Some(DataSpec::Generate { n, theta }) => {
            let mut stream = RandomStream::new(cfg.seed, DATA_STREAM);
            (0..*n)
                .map(|_| fam.sample(theta, &mut stream))
                .collect::<Result<Vec<f64>, Error>>()
                .map_err(lib("families"))
        }
    }
}

fn factor_mode(cfg: &ExperimentConfig) -> FactorMode {
    if cfg.factor_mode == "unchecked" {
        FactorMode::Unchecked
    } else {
        FactorMode::Strict
    }
}

fn options(cfg: &ExperimentConfig, default_nodes: usize) -> PosteriorOptions {
    PosteriorOptions::default().with_nodes(if cfg.nodes == 0 {
        default_nodes
    } else {
        cfg.nodes
    })
}

fn coverage_config(cfg: &ExperimentConfig) -> CoverageConfig {
    let mut c = CoverageConfig {
        alpha: cfg.alpha,
        delta: cfg.delta,
        trials: cfg.trials,
        n_obs: cfg.n_obs,
        seed: cfg.seed,
        base_id: cfg.base_id,
        allow_failures: cfg.allow_failures,
        ..Default::default()
    };
    if cfg.nodes != 0 {
        c.nodes = cfg.nodes;
    }
    c
}

/// Plot range of a 1-D posterior: its 0.1 % and 99.9 % quantiles.
fn curve(p: &Posterior, points: usize) -> Result<Vec<(f64, f64)>, Error> {
    let (lo, hi) = (p.quantile(1e-3)?, p.quantile(1.0 - 1e-3)?);
    Ok((0..points)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (t, p.density(t))
        })
        .collect())
}

fn posterior_1d(cfg: &ExperimentConfig, fam: &Family, data: &[f64]) -> Result<Outputs, RunError> {
    let m = lib("posterior");
    let zeta = factors::resolve(&cfg.factor, fam).map_err(&m)?;
    let post =
        build_posterior(fam, &zeta, data, factor_mode(cfg), &options(cfg, 1024)).map_err(&m)?;
    let interval = confidence_interval(&post, cfg.alpha, cfg.delta).map_err(&m)?;
    let evaluations: Vec<Value> = data
        .iter()
        .map(|&t| json!({"theta": t, "density": post.density(t), "cdf": post.cdf(t)}))
        .collect();
    let json = json!({
        "family": fam.label(),
        "factor": zeta.label(),
        "data": data,
        "log_eta": post.log_eta(),
        "mode": post.mode(),
        "mean": post.mean().ok(),
        "interval": interval,
        "evaluations": evaluations,
        "record": post.to_record(),
    });
    let csv = csv_table(
        &["theta", "density", "cdf"],
        post.nodes()
            .iter()
            .map(|&t| vec![t, post.density(t), post.cdf(t)]),
    );
    let plot = cfg.emit_plot.then(|| {
        let pts = curve(&post, 400).map_err(|e| e.to_string())?;
        line_chart(
            &format!("posterior: {} with {}", fam.label(), zeta.label()),
            "θ",
            "density",
            &[Series::new("f(θ | x)", pts)],
        )
    });
    Ok(Outputs { json, csv, plot })
}

fn posterior_2d(cfg: &ExperimentConfig, fam: &Family, data: &[f64]) -> Result<Outputs, RunError> {
    let m = lib("posterior");
    let zeta = factors::resolve(&cfg.factor, fam).map_err(&m)?;
    let post = build_posterior_2d(fam, &zeta, data, &options(cfg, 1024)).map_err(&m)?;
    let mu = marginalize(&post, Component::Mu);
    let sigma = marginalize(&post, Component::Sigma);
    let json = json!({
        "family": fam.label(),
        "factor": zeta.label(),
        "data": data,
        "log_eta": post.log_eta(),
        "marginal_mu": {"mode": mu.mode(), "median": mu.quantile(0.5).ok()},
        "marginal_sigma": {"mode": sigma.mode(), "median": sigma.quantile(0.5).ok()},
        "record": post.to_record(),
    });
    let mut rows = Vec::new();
    for (i, &m) in post.mu_grid().iter().enumerate() {
        for (j, &s) in post.sigma_grid().iter().enumerate() {
            rows.push(vec![m, s, post.density_grid()[i][j]]);
        }
    }
    let csv = csv_table(&["mu", "sigma", "density"], rows);
    let plot = cfg.emit_plot.then(|| {
        let a = curve(&mu, 400).map_err(|e| e.to_string())?;
        let b = curve(&sigma, 400).map_err(|e| e.to_string())?;
        line_chart(
            &format!("marginals: {} with {}", fam.label(), zeta.label()),
            "μ (solid), σ (dashed)",
            "density",
            &[
                Series::new("f(μ | x)", a),
                Series::new("f(σ | x)", b).dashed(),
            ],
        )
    });
    Ok(Outputs { json, csv, plot })
}

fn coverage(cfg: &ExperimentConfig, fam: &Family) -> Result<Outputs, RunError> {
    let m = lib("calibration");
    let zeta = factors::resolve(&cfg.factor, fam).map_err(&m)?;
    let truth = cfg.truth.clone().expect("validated");
    let cc = coverage_config(cfg);
    let report = coverage_experiment(fam, &zeta, &truth, &cc, factor_mode(cfg)).map_err(&m)?;
    info!(
        "coverage {} of {} ({} failed)",
        report.covered, report.trials, report.failed_trials
    );
    let csv = format!("{}\n{}\n", CalibrationReport::CSV_HEADER, report.csv_row());
    let plot = cfg.emit_plot.then(|| {
        let deltas: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
        let pts = coverage_curve(fam, &zeta, &truth, &cc, factor_mode(cfg), &deltas)
            .map_err(|e| e.to_string())?;
        line_chart(
            &format!(
                "coverage: {} with {}, {} trials",
                fam.label(),
                zeta.label(),
                cc.trials
            ),
            "δ (central intervals)",
            "empirical coverage",
            &[
                Series::new("empirical", pts),
                Series::new("target", vec![(0.05, 0.05), (0.95, 0.95)]).dashed(),
            ],
        )
    });
    Ok(Outputs {
        json: serde_json::to_value(&report).map_err(|e| RunError::Io(e.to_string()))?,
        csv,
        plot,
    })
}

fn default_fiducial_grid(fam: &Family, x: f64) -> GridSpec {
    let space = fam.param_space()[0];
    if space.lo.is_finite() && !space.hi.is_finite() {
        let c = if x.abs() > 0.0 { x.abs() } else { 1.0 };
        GridSpec {
            lo: space.lo + 0.05 * c,
            hi: space.lo + 50.0 * c,
            points: 512,
            spacing: Spacing::Log,
        }
    } else {
        GridSpec {
            lo: x - 6.0,
            hi: x + 6.0,
            points: 512,
            spacing: Spacing::Linear,
        }
    }
}

fn fiducial(cfg: &ExperimentConfig, fam: &Family, data: &[f64]) -> Result<Outputs, RunError> {
    let m = lib("calibration");
    let x = data[0];
    let zeta = factors::resolve(&cfg.factor, fam).map_err(&m)?;
    let post = build_posterior(fam, &zeta, &[x], FactorMode::Unchecked, &options(cfg, 1024))
        .map_err(&m)?;
    let grid = cfg
        .grid
        .clone()
        .unwrap_or_else(|| default_fiducial_grid(fam, x));
    let lambdas = grid.points();
    let cdf = |l: f64| fam.cdf(x, &[l]);
    let residual = fiducial_residual_with(&post, cdf, &lambdas).map_err(&m)?;
    let fid: Vec<f64> = lambdas
        .iter()
        .map(|&l| infer_core::numerics::central_diff(cdf, l).abs())
        .collect();
    let json = json!({
        "family": fam.label(),
        "factor": zeta.label(),
        "x": x,
        "residual": residual,
        "grid": grid,
    });
    let csv = csv_table(
        &["lambda", "posterior", "fiducial"],
        lambdas
            .iter()
            .zip(&fid)
            .map(|(&l, &d)| vec![l, post.density(l), d]),
    );
    let plot = cfg.emit_plot.then(|| {
        let a: Vec<(f64, f64)> = lambdas.iter().map(|&l| (l, post.density(l))).collect();
        let b: Vec<(f64, f64)> = lambdas.iter().copied().zip(fid.iter().copied()).collect();
        line_chart(
            &format!("fiducial check: {} at x = {x}", fam.label()),
            "λ",
            "density",
            &[
                Series::new("f(λ | x)", a),
                Series::new("|∂λ F(x | λ)|", b).dashed(),
            ],
        )
    });
    Ok(Outputs { json, csv, plot })
}

fn compare(cfg: &ExperimentConfig, fam: &Family, data: &[f64]) -> Result<Outputs, RunError> {
    let m = lib("rivals");
    let (a, b) = (cfg.rules[0], cfg.rules[1]);
    let grid = cfg.grid.as_ref().map(GridSpec::points);
    let cmp = compare_rules(a, b, fam, data, grid, &options(cfg, 1024)).map_err(&m)?;
    let header = ["lambda", a.label(), b.label()];
    let csv = csv_table(
        &header,
        (0..cmp.grid.len()).map(|i| vec![cmp.grid[i], cmp.density_a[i], cmp.density_b[i]]),
    );
    let plot = cfg.emit_plot.then(|| {
        let pa = cmp
            .grid
            .iter()
            .copied()
            .zip(cmp.density_a.iter().copied())
            .collect();
        let pb = cmp
            .grid
            .iter()
            .copied()
            .zip(cmp.density_b.iter().copied())
            .collect();
        line_chart(
            &format!("λ = μ/σ marginals, L1 = {:.4}", cmp.l1_distance),
            "λ",
            "density",
            &[
                Series::new(a.label(), pa),
                Series::new(b.label(), pb).dashed(),
            ],
        )
    });
    let json = json!({
        "rule_a": cmp.rule_a,
        "rule_b": cmp.rule_b,
        "l1_distance": cmp.l1_distance,
        "product_rule_residual_a": cmp.product_rule_residual_a,
        "product_rule_residual_b": cmp.product_rule_residual_b,
        "grid_echo": cmp.grid_echo,
        "data": data,
    });
    Ok(Outputs { json, csv, plot })
}

fn pit(cfg: &ExperimentConfig, fam: &Family) -> Result<Outputs, RunError> {
    let m = lib("calibration");
    let zeta = factors::resolve(&cfg.factor, fam).map_err(&m)?;
    let truth = match cfg.truth {
        Some(Truth::Fixed { value }) => value,
        _ => unreachable!("validated"),
    };
    let report =
        predictive_pit_check(fam, &zeta, truth, &coverage_config(cfg), cfg.source).map_err(&m)?;
    let csv = csv_table(
        &["trials", "ks_statistic", "critical_1pct", "seed"],
        [vec![
            report.trials as f64,
            report.ks_statistic,
            report.critical_1pct,
            report.seed as f64,
        ]],
    );
    let json = json!({
        "family": fam.label(),
        "factor": zeta.label(),
        "source": cfg.source,
        "truth": truth,
        "report": report,
        "uniform_at_1pct": report.ks_statistic < report.critical_1pct,
    });
    let plot = cfg.emit_plot.then(|| {
        Err("pit has no chart; only posterior, coverage and comparison charts exist".to_string())
    });
    Ok(Outputs { json, csv, plot })
}

fn reduce(cfg: &ExperimentConfig, fam: &Family, data: &[f64]) -> Result<Outputs, RunError> {
    let m = lib("invariance");
    let grp = match &cfg.group {
        Some(g) => lookup_group(g).map_err(&m)?,
        None => fam.group().expect("validated"),
    };
    let maps = reduction_maps(&grp, fam, None, None).map_err(&m)?;
    let theta = fam.reference_theta();
    let xs: Vec<f64> = if data.is_empty() {
        (1..10)
            .map(|i| fam.quantile(i as f64 / 10.0, &theta))
            .collect::<Result<_, _>>()
            .map_err(&m)?
    } else {
        data.to_vec()
    };
    let xs: Vec<f64> = xs
        .into_iter()
        .filter(|&x| maps.branch().interior(x))
        .collect();
    let pb = maps.param_branch();
    let lambdas: Vec<f64> = (1..8)
        .map(|i| {
            let t = i as f64 / 8.0;
            match (pb.lo.is_finite(), pb.hi.is_finite()) {
                (true, true) => pb.lo + t * (pb.hi - pb.lo),
                (true, false) => pb.lo + (4.0 * t - 2.0).exp(),
                (false, true) => pb.hi - (4.0 * t - 2.0).exp(),
                (false, false) => theta[0] + 8.0 * t - 4.0,
            }
        })
        .collect();
    let residual = check_h_form(fam, &maps, &xs, &lambdas).map_err(&m)?;
    let mut rows = Vec::new();
    for &x in &xs {
        rows.push(vec![
            x,
            maps.s(x).map_err(&m)?,
            maps.s_prime(x).map_err(&m)?,
        ]);
    }
    let csv = csv_table(&["x", "s", "s_prime"], rows);
    let sbar: Vec<Value> = lambdas
        .iter()
        .map(|&l| json!({"lambda": l, "s_bar": maps.s_bar(l).ok()}))
        .collect();
    let json = json!({
        "family": fam.label(),
        "group": grp.label(),
        "h_form_residual": residual,
        "sample_branch": [maps.branch().lo, maps.branch().hi],
        "param_branch": [pb.lo, pb.hi],
        "s_bar": sbar,
    });
    let plot = cfg.emit_plot.then(|| {
        Err("reduce has no chart; only posterior, coverage and comparison charts exist".to_string())
    });
    Ok(Outputs { json, csv, plot })
}

/// Runs the command and writes `<prefix>.json`, `<prefix>.csv`, optionally
/// `<prefix>.svg`, and `<prefix>.manifest.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    let t0 = Instant::now();
    let fam: Family = families::lookup(&cfg.family).map_err(lib("families"))?;
    let data = resolve_data(cfg, &fam)?;
    info!(
        "{} on {} with {} observation(s)",
        cfg.command.label(),
        cfg.family,
        data.len()
    );
    let joint = matches!(fam.as_location_scale().map(|l| l.pin()), Some(Pin::Joint));
    let out = match cfg.command {
        Command::Posterior if joint => posterior_2d(cfg, &fam, &data)?,
        Command::Posterior => posterior_1d(cfg, &fam, &data)?,
        Command::Coverage => coverage(cfg, &fam)?,
        Command::Fiducial => fiducial(cfg, &fam, &data)?,
        Command::ComparePriors => compare(cfg, &fam, &data)?,
        Command::Pit => pit(cfg, &fam)?,
        Command::Reduce => reduce(cfg, &fam, &data)?,
    };

    let prefix = &cfg.output;
    let path = |ext: &str| PathBuf::from(format!("{prefix}.{ext}"));
    let mut files = Vec::new();
    let json_text = serde_json::to_string_pretty(&json!({
        "command": cfg.command.label(),
        "config": cfg,
        "result": out.json,
    }))
    .map_err(|e| RunError::Io(e.to_string()))?;
    write_atomic(&path("json"), format!("{json_text}\n").as_bytes())?;
    files.push(path("json"));
    write_atomic(&path("csv"), out.csv.as_bytes())?;
    files.push(path("csv"));
    match out.plot {
        Some(Ok(svg)) => match write_atomic(&path("svg"), svg.as_bytes()) {
            Ok(()) => files.push(path("svg")),
            Err(e) => warn!("plot not written: {e}"),
        },
        Some(Err(e)) => warn!("plot skipped: {e}"),
        None => {}
    }
    let manifest_path = path("manifest.json");
    files.push(manifest_path.clone());
    let manifest = RunManifest {
        config_echo: serde_json::to_value(cfg).map_err(|e| RunError::Io(e.to_string()))?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: t0.elapsed().as_secs_f64(),
        output_files: files.iter().map(|p| p.display().to_string()).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
    write_atomic(&manifest_path, format!("{text}\n").as_bytes())?;
    Ok(manifest)
}
