//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::time::Instant;

use infer_core::calibration::{
    confidence_interval, coverage_experiment, fiducial_residual, predictive_pit_check,
    CoverageConfig, PredictiveSource, Truth,
};
use infer_core::families::{lookup, FamilySpec, MonotoneMap};
use infer_core::invariance::{check_h_form, reduction_maps, GroupAction};
use infer_core::numerics::Interval;
use infer_core::posterior::{
    build_posterior, consistency_factor, product_rule_residual, sequential_update,
    transform_factor, transform_posterior, ConsistencyFactor, FactorKind, FactorMode,
    PosteriorOptions,
};
use infer_core::rivals::{
    compare_rules, consistency_marginal_lambda, default_lambda_grid, jeffreys_factor, l1_trapezoid,
    lambda_marginal_via_joint, PriorRule,
};
use infer_core::{Error, Family, Result};

type Outcome = Result<(bool, String)>;

fn opts() -> PosteriorOptions {
    PosteriorOptions::default()
}

fn fam(label: &str) -> Family {
    lookup(label).unwrap()
}

fn factor(kind: FactorKind) -> ConsistencyFactor {
    consistency_factor(kind).unwrap()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

fn normal_coverage() -> Outcome {
    let f = fam("normal-location");
    let z = factor(FactorKind::Location);
    let cfg = CoverageConfig {
        alpha: 0.05,
        delta: 0.9,
        trials: 100_000,
        n_obs: 1,
        seed: 42,
        ..Default::default()
    };
    let t0 = Instant::now();
    let fixed = coverage_experiment(
        &f,
        &z,
        &Truth::Fixed { value: 0.7 },
        &cfg,
        FactorMode::Strict,
    )?;
    let secs = t0.elapsed().as_secs_f64();
    // the same seeded trials repeated with the truth drifting per trial
    let drift = coverage_experiment(
        &f,
        &z,
        &Truth::Cycle {
            values: vec![-5.0, 0.0, 12.0],
        },
        &cfg,
        FactorMode::Strict,
    )?;
    let ok = (fixed.coverage - 0.9).abs() <= 0.003
        && (drift.coverage - 0.9).abs() <= 0.003
        && secs < 60.0;
    Ok((
        ok,
        format!(
            "coverage {:.5} (fixed truth, {secs:.1} s), {:.5} (drifting truth); target 0.900 ± 0.003",
            fixed.coverage, drift.coverage
        ),
    ))
}

fn scale_coverage() -> Outcome {
    let cfg = CoverageConfig {
        alpha: 0.25,
        delta: 0.5,
        trials: 100_000,
        n_obs: 1,
        seed: 7,
        ..Default::default()
    };
    let r = coverage_experiment(
        &fam("exponential-scale"),
        &factor(FactorKind::Scale),
        &Truth::Fixed { value: 2.0 },
        &cfg,
        FactorMode::Strict,
    )?;
    Ok((
        (r.coverage - 0.5).abs() <= 0.005,
        format!("coverage {:.5}; target 0.500 ± 0.005", r.coverage),
    ))
}

fn fiducial() -> Outcome {
    let a = fiducial_residual(
        &fam("normal-location"),
        &factor(FactorKind::Location),
        0.0,
        &linspace(-6.0, 6.0, 512),
    )?;
    let b = fiducial_residual(
        &fam("exponential-scale"),
        &factor(FactorKind::Scale),
        1.0,
        &logspace(0.05, 50.0, 512),
    )?;
    Ok((
        a < 1e-6 && b < 1e-6,
        format!("residuals {a:.2e} (normal location), {b:.2e} (exponential scale); bound 1e-6"),
    ))
}

fn exponential_closed_form() -> Outcome {
    let p = build_posterior(
        &fam("exponential-scale"),
        &factor(FactorKind::Scale),
        &[1.0],
        FactorMode::Strict,
        &opts(),
    )?;
    let worst = logspace(0.05, 50.0, 2000)
        .into_iter()
        .map(|s| (p.density(s) - (-1.0 / s).exp() / (s * s)).abs())
        .fold(0.0, f64::max);
    let eta = p.log_eta().exp();
    Ok((
        worst < 1e-7 && (eta - 1.0).abs() < 1e-7,
        format!("max |f - σ⁻²e^(-1/σ)| = {worst:.2e}, η = {eta:.10}; bound 1e-7"),
    ))
}

fn product_rule() -> Outcome {
    let f = fam("normal");
    let good = product_rule_residual(
        &f,
        &factor(FactorKind::JointLocationScale),
        &[0.0, 2.0],
        &opts(),
    )?;
    let bad = product_rule_residual(
        &f,
        &ConsistencyFactor::scale_power(2.0),
        &[0.0, 2.0],
        &opts(),
    )?;
    Ok((
        good < 1e-5 && bad > 0.01,
        format!("residual {good:.2e} with σ⁻¹ (< 1e-5), {bad:.3} with σ⁻² (> 0.01)"),
    ))
}

fn rival_incompatibility() -> Outcome {
    let f = fam("normal");
    let data = [1.0, 1.0];
    let cmp = compare_rules(
        PriorRule::Consistency,
        PriorRule::Reference,
        &f,
        &data,
        None,
        &opts(),
    )?;
    let closed = consistency_marginal_lambda(&data)?;
    let routed =
        lambda_marginal_via_joint(&f, &factor(FactorKind::JointLocationScale), &data, &opts())?;
    let grid = default_lambda_grid(data.len());
    let a: Vec<f64> = grid.iter().map(|&l| closed.density(l)).collect();
    let b: Vec<f64> = grid.iter().map(|&l| routed.density(l)).collect();
    let routes = l1_trapezoid(&grid, &a, &b);
    Ok((
        cmp.l1_distance > 0.01 && routes < 1e-4,
        format!(
            "L1(consistency, reference) = {:.4} (> 0.01); L1(closed, 2-D route) = {routes:.2e} (< 1e-4)",
            cmp.l1_distance
        ),
    ))
}

fn jeffreys() -> Outcome {
    let loc = jeffreys_factor(&fam("normal-location"))?;
    let scale = jeffreys_factor(&fam("normal-scale"))?;
    let joint = jeffreys_factor(&fam("normal"))?;
    let r_loc = loc.zeta(&[-1.5]) / loc.zeta(&[2.0]);
    let r_scale = scale.zeta(&[1.0]) / scale.zeta(&[2.0]);
    let r_joint = joint.zeta(&[0.3, 1.0]) / joint.zeta(&[0.3, 2.0]);
    let errs = [
        (r_loc - 1.0).abs(),
        (r_scale / 2.0 - 1.0).abs(),
        (r_joint / 4.0 - 1.0).abs(),
    ];
    Ok((
        errs.iter().all(|&e| e < 1e-4),
        format!(
            "ratios {r_loc:.7} (∝1, want 1), {r_scale:.7} (∝σ⁻¹, want 2), {r_joint:.7} (∝σ⁻², want 4)"
        ),
    ))
}

fn trivial_locus() -> Outcome {
    let f = fam("normal-scale");
    let z = factor(FactorKind::Scale);
    let refused = matches!(
        build_posterior(&f, &z, &[0.0], FactorMode::Strict, &opts()),
        Err(Error::TrivialLocusDatum { .. })
    );
    let near = build_posterior(&f, &z, &[1e-6], FactorMode::Strict, &opts()).is_ok();
    Ok((
        refused && near,
        format!("x=0 refused: {refused}; x=1e-6 builds: {near}"),
    ))
}

fn properties() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // sequential = one-shot
    let f = fam("normal-location");
    let z = factor(FactorKind::Location);
    let p1 = build_posterior(&f, &z, &[0.0], FactorMode::Strict, &opts())?;
    let seq = sequential_update(&p1, &f, 2.0, &opts())?;
    let once = build_posterior(&f, &z, &[0.0, 2.0], FactorMode::Strict, &opts())?;
    let d = linspace(-3.0, 5.0, 81)
        .into_iter()
        .map(|m| (seq.density(m) - once.density(m)).abs())
        .fold(0.0, f64::max);
    ok &= d < 1e-6;
    notes.push(format!("sequential {d:.1e}"));

    // reparameterization covariance under λ = ln σ
    let base = fam("normal-scale");
    let (b1, b2) = (base.clone(), base.clone());
    let lam_family = Family::custom_unchecked(FamilySpec::new(
        "normal-logscale",
        vec![Interval::real_line()],
        vec![0.0],
        move |x: f64, t: &[f64]| b1.pdf(x, &[t[0].exp()]),
        move |x: f64, t: &[f64]| b2.cdf(x, &[t[0].exp()]),
        |_t: &[f64]| Interval::real_line(),
    ));
    let zl = transform_factor(&factor(FactorKind::Scale), &MonotoneMap::ln());
    let data = [0.4, -1.3, 2.0];
    let direct = build_posterior(&lam_family, &zl, &data, FactorMode::Unchecked, &opts())?;
    let p = build_posterior(
        &base,
        &factor(FactorKind::Scale),
        &data,
        FactorMode::Strict,
        &opts(),
    )?;
    let pushed = transform_posterior(&p, &MonotoneMap::ln(), &opts())?;
    let d = linspace(-2.0, 2.5, 46)
        .into_iter()
        .map(|l| (pushed.density(l) - direct.density(l)).abs())
        .fold(0.0, f64::max);
    ok &= d < 1e-6;
    notes.push(format!("reparam {d:.1e}"));
    let ci = confidence_interval(&p, 0.1, 0.8)?;
    let cl = confidence_interval(&pushed, 0.1, 0.8)?;
    ok &= (cl.theta1 - ci.theta1.ln()).abs() < 1e-6 && (cl.theta2 - ci.theta2.ln()).abs() < 1e-6;

    // constant rescaling of the factor
    let e = fam("exponential-scale");
    let zs = factor(FactorKind::Scale);
    let a = build_posterior(&e, &zs, &[0.5, 2.0], FactorMode::Strict, &opts())?;
    let b = build_posterior(
        &e,
        &zs.scaled(7.0)?,
        &[0.5, 2.0],
        FactorMode::Strict,
        &opts(),
    )?;
    let d = logspace(0.05, 50.0, 60)
        .into_iter()
        .map(|s| (a.density(s) - b.density(s)).abs())
        .fold(0.0, f64::max);
    ok &= d < 1e-9;
    notes.push(format!("rescale {d:.1e}"));

    // H-form for invariant families
    let m = reduction_maps(&GroupAction::translation(), &f, Some(0.0), Some(0.0))?;
    let h1 = check_h_form(&f, &m, &[-2.0, -0.5, 0.0, 1.0, 2.5], &[-1.0, 0.0, 0.7, 2.0])?;
    let m = reduction_maps(&GroupAction::scaling(), &e, Some(1.0), Some(1.0))?;
    let h2 = check_h_form(&e, &m, &[0.2, 1.0, 3.0], &[0.5, 1.0, 2.0, 4.0])?;
    let h = h1.max(h2);
    ok &= h < 1e-8;
    notes.push(format!("H-form {h:.1e}"));

    // predictive PIT
    let cfg = CoverageConfig {
        trials: 10_000,
        seed: 5,
        ..Default::default()
    };
    let pit = predictive_pit_check(&e, &zs, 2.0, &cfg, PredictiveSource::Posterior)?;
    ok &= pit.ks_statistic < pit.critical_1pct;
    notes.push(format!(
        "PIT KS {:.4} (< {:.4})",
        pit.ks_statistic, pit.critical_1pct
    ));

    Ok((ok, notes.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("calibration of the location posterior", normal_coverage),
        ("calibration of the scale posterior", scale_coverage),
        ("fiducial condition", fiducial),
        (
            "consistency factor matches closed form",
            exponential_closed_form,
        ),
        ("product rule", product_rule),
        ("rival incompatibility", rival_incompatibility),
        ("Jeffreys factors", jeffreys),
        ("trivial-locus refusal", trivial_locus),
        ("property suites", properties),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match std::panic::catch_unwind(run) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] criterion {}: {name}: {detail} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
