//! Experiment configuration: parsing, flag overrides and validation.

use infer_core::calibration::{PredictiveSource, Truth};
use infer_core::families::{self, Pin};
use infer_core::invariance::{lookup_group, GROUP_LABELS};
use infer_core::rivals::PriorRule;
use infer_core::Family;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Posterior,
    Coverage,
    Fiducial,
    ComparePriors,
    Pit,
    Reduce,
}

impl Command {
    pub const LABELS: [&'static str; 6] = [
        "posterior",
        "coverage",
        "fiducial",
        "compare-priors",
        "pit",
        "reduce",
    ];

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "posterior" => Command::Posterior,
            "coverage" => Command::Coverage,
            "fiducial" => Command::Fiducial,
            "compare-priors" => Command::ComparePriors,
            "pit" => Command::Pit,
            "reduce" => Command::Reduce,
            _ => return None,
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Command::Posterior => "posterior",
            Command::Coverage => "coverage",
            Command::Fiducial => "fiducial",
            Command::ComparePriors => "compare-priors",
            Command::Pit => "pit",
            Command::Reduce => "reduce",
        }
    }

    /// Library module the command runs in, for error provenance.
    pub fn module(&self) -> &'static str {
        match self {
            Command::Posterior => "posterior",
            Command::Coverage | Command::Fiducial | Command::Pit => "calibration",
            Command::ComparePriors => "rivals",
            Command::Reduce => "invariance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DataSpec {
    Values(Vec<f64>),
    /// `n` draws from the family at `theta`, using the config seed.
    Generate {
        n: usize,
        theta: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let n = self.points;
        let at = |i: usize| i as f64 / (n - 1) as f64;
        match self.spacing {
            Spacing::Linear => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * at(i))
                .collect(),
            Spacing::Log => {
                let (a, b) = (self.lo.ln(), self.hi.ln());
                (0..n).map(|i| (a + (b - a) * at(i)).exp()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub family: String,
    pub group: Option<String>,
    pub factor: String,
    pub factor_mode: String,
    pub data: Option<DataSpec>,
    pub alpha: f64,
    pub delta: f64,
    pub trials: usize,
    pub n_obs: usize,
    pub seed: u64,
    pub base_id: u64,
    pub truth: Option<Truth>,
    pub rules: Vec<PriorRule>,
    pub grid: Option<GridSpec>,
    pub source: PredictiveSource,
    pub nodes: usize,
    pub allow_failures: bool,
    pub output: String,
    pub emit_plot: bool,
}

const FIELDS: &[&str] = &[
    "command",
    "family",
    "group",
    "factor",
    "factor_mode",
    "data",
    "alpha",
    "delta",
    "trials",
    "n_obs",
    "seed",
    "base_id",
    "truth",
    "rules",
    "grid",
    "source",
    "nodes",
    "allow_failures",
    "output",
    "emit_plot",
];

pub const FACTOR_LABELS: &[&str] = &[
    "consistency",
    "location",
    "scale",
    "joint",
    "uniform",
    "jeffreys",
    "reference",
    "sigma^-<p>",
    "custom:<theta>:<zeta>,...",
];

/// Flag overrides applied on top of the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub fields: Vec<(String, Value)>,
}

impl Overrides {
    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.fields.push((key.to_string(), v.into()));
    }
}

/// One problem with one field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Checker<'a> {
    obj: &'a Map<String, Value>,
    errors: Vec<FieldError>,
}

impl<'a> Checker<'a> {
    fn err(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.obj.get(key) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.err(key, format!("expected a string, got {v}"));
                None
            }
        }
    }

    fn real(&mut self, key: &str, default: f64) -> f64 {
        match self.obj.get(key) {
            None | Some(Value::Null) => default,
            Some(Value::Number(n)) => n.as_f64().unwrap_or(default),
            Some(v) => {
                self.err(key, format!("expected a number, got {v}"));
                default
            }
        }
    }

    fn count(&mut self, key: &str, default: u64) -> u64 {
        match self.obj.get(key) {
            None | Some(Value::Null) => default,
            Some(v) => match v.as_u64() {
                Some(n) => n,
                None => {
                    self.err(key, format!("expected a non-negative integer, got {v}"));
                    default
                }
            },
        }
    }

    fn flag(&mut self, key: &str) -> bool {
        match self.obj.get(key) {
            None | Some(Value::Null) => false,
            Some(Value::Bool(b)) => *b,
            Some(v) => {
                self.err(key, format!("expected true or false, got {v}"));
                false
            }
        }
    }

    fn probability(&mut self, key: &str, default: f64) -> f64 {
        let p = self.real(key, default);
        if !(0.0..=1.0).contains(&p) {
            self.err(key, format!("{p} is outside [0, 1]"));
        }
        p
    }
}

fn parse_factor_syntax(label: &str) -> Result<(), String> {
    if let Some(p) = label.strip_prefix("sigma^-") {
        return p
            .parse::<f64>()
            .map(|_| ())
            .map_err(|_| format!("'{label}': power after 'sigma^-' is not a number"));
    }
    if let Some(table) = label.strip_prefix("custom:") {
        return crate::factors::parse_table(table).map(|_| ());
    }
    if FACTOR_LABELS[..7].contains(&label) {
        Ok(())
    } else {
        Err(format!(
            "unknown factor '{label}'; available: {}",
            FACTOR_LABELS.join(", ")
        ))
    }
}

fn parse_data(c: &mut Checker) -> Option<DataSpec> {
    let v = c.obj.get("data")?.clone();
    match &v {
        Value::Null => None,
        Value::Array(items) => {
            let xs: Option<Vec<f64>> = items.iter().map(|x| x.as_f64()).collect();
            match xs {
                Some(xs) => Some(DataSpec::Values(xs)),
                None => {
                    c.err("data", "expected a list of numbers");
                    None
                }
            }
        }
        Value::Object(o) => {
            let g = match o.get("generate") {
                Some(Value::Object(g)) => g,
                _ => {
                    c.err(
                        "data",
                        "expected a list of numbers or {\"generate\": {\"n\", \"theta\"}}",
                    );
                    return None;
                }
            };
            let n = g.get("n").and_then(Value::as_u64);
            let theta = match g.get("theta") {
                Some(Value::Number(x)) => x.as_f64().map(|x| vec![x]),
                Some(Value::Array(a)) => a.iter().map(Value::as_f64).collect(),
                _ => None,
            };
            match (n, theta) {
                (Some(n), Some(theta)) if n > 0 => Some(DataSpec::Generate {
                    n: n as usize,
                    theta,
                }),
                _ => {
                    c.err(
                        "data.generate",
                        "needs a positive integer 'n' and a numeric 'theta'",
                    );
                    None
                }
            }
        }
        other => {
            c.err("data", format!("expected a list of numbers, got {other}"));
            None
        }
    }
}

fn parse_truth(c: &mut Checker) -> Option<Truth> {
    match c.obj.get("truth")? {
        Value::Null => None,
        Value::Number(n) => n.as_f64().map(|value| Truth::Fixed { value }),
        v => match serde_json::from_value::<Truth>(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                c.err(
                    "truth",
                    format!("expected a number or {{\"kind\": \"fixed\"|\"cycle\"|\"uniform\", ...}}: {e}"),
                );
                None
            }
        },
    }
}

fn parse_grid(c: &mut Checker) -> Option<GridSpec> {
    let o = match c.obj.get("grid")? {
        Value::Null => return None,
        Value::Object(o) => o.clone(),
        v => {
            c.err(
                "grid",
                format!("expected {{\"lo\", \"hi\", \"points\", \"spacing\"}}, got {v}"),
            );
            return None;
        }
    };
    let lo = o.get("lo").and_then(Value::as_f64);
    let hi = o.get("hi").and_then(Value::as_f64);
    let points = o.get("points").and_then(Value::as_u64).unwrap_or(512) as usize;
    let spacing = match o.get("spacing").and_then(Value::as_str).unwrap_or("linear") {
        "linear" => Spacing::Linear,
        "log" => Spacing::Log,
        s => {
            c.err("grid.spacing", format!("'{s}' is not 'linear' or 'log'"));
            Spacing::Linear
        }
    };
    match (lo, hi) {
        (Some(lo), Some(hi)) if lo < hi && points >= 2 => {
            if spacing == Spacing::Log && lo <= 0.0 {
                c.err("grid.lo", "log spacing needs lo > 0");
            }
            Some(GridSpec {
                lo,
                hi,
                points,
                spacing,
            })
        }
        _ => {
            c.err("grid", "needs numeric lo < hi and at least 2 points");
            None
        }
    }
}

fn parse_rules(c: &mut Checker) -> Vec<PriorRule> {
    let default = vec![PriorRule::Consistency, PriorRule::Reference];
    let items = match c.obj.get("rules") {
        None | Some(Value::Null) => return default,
        Some(Value::Array(a)) => a.clone(),
        Some(v) => {
            c.err(
                "rules",
                format!("expected a list of two rule labels, got {v}"),
            );
            return default;
        }
    };
    let mut rules = Vec::new();
    for it in items {
        match it.as_str().map(PriorRule::from_label) {
            Some(Ok(r)) => rules.push(r),
            Some(Err(e)) => c.err("rules", e.to_string()),
            None => c.err("rules", format!("expected a rule label, got {it}")),
        }
    }
    if rules.len() != 2 {
        c.err(
            "rules",
            format!("expected exactly two rules, got {}", rules.len()),
        );
        return default;
    }
    rules
}

/// Parses and cross-checks a config document, applying `overrides` first.
/// Returns every problem found, not only the first.
pub fn validate_with(
    text: &str,
    overrides: &Overrides,
) -> Result<ExperimentConfig, Vec<FieldError>> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| {
        vec![FieldError {
            field: "<document>".to_string(),
            message: format!("not valid JSON: {e}"),
        }]
    })?;
    let obj = match doc.as_object_mut() {
        Some(o) => o,
        None => {
            return Err(vec![FieldError {
                field: "<document>".to_string(),
                message: "expected a JSON object".to_string(),
            }])
        }
    };
    for (k, v) in &overrides.fields {
        obj.insert(k.clone(), v.clone());
    }
    let mut c = Checker {
        obj,
        errors: Vec::new(),
    };
    for k in c.obj.keys() {
        if !FIELDS.contains(&k.as_str()) {
            c.errors.push(FieldError {
                field: k.clone(),
                message: format!("unknown field; known fields: {}", FIELDS.join(", ")),
            });
        }
    }

    let command = match c.string("command") {
        Some(s) => match Command::parse(&s) {
            Some(cmd) => Some(cmd),
            None => {
                c.err(
                    "command",
                    format!(
                        "unknown command '{s}'; available: {}",
                        Command::LABELS.join(", ")
                    ),
                );
                None
            }
        },
        None => {
            c.err(
                "command",
                format!("required; one of {}", Command::LABELS.join(", ")),
            );
            None
        }
    };

    let family_label = c.string("family").unwrap_or_else(|| {
        if command == Some(Command::ComparePriors) {
            "normal".to_string()
        } else {
            c.err(
                "family",
                format!("required; one of {}", families::LABELS.join(", ")),
            );
            String::new()
        }
    });
    let family: Option<Family> = if family_label.is_empty() {
        None
    } else {
        match families::lookup(&family_label) {
            Ok(f) => Some(f),
            Err(_) => {
                c.err(
                    "family",
                    format!(
                        "unknown family '{family_label}'; available: {}",
                        families::LABELS.join(", ")
                    ),
                );
                None
            }
        }
    };

    let group = c.string("group");
    if let Some(g) = &group {
        if lookup_group::<f64>(g).is_err() {
            c.err(
                "group",
                format!(
                    "unknown group '{g}'; available: {}",
                    GROUP_LABELS.join(", ")
                ),
            );
        }
    }

    let factor = c
        .string("factor")
        .unwrap_or_else(|| "consistency".to_string());
    if let Err(e) = parse_factor_syntax(&factor) {
        c.err("factor", e);
    }
    let factor_mode = c
        .string("factor_mode")
        .unwrap_or_else(|| "strict".to_string());
    if factor_mode != "strict" && factor_mode != "unchecked" {
        c.err(
            "factor_mode",
            format!("'{factor_mode}' is not 'strict' or 'unchecked'"),
        );
    }

    let data = parse_data(&mut c);
    let delta = c.probability("delta", 0.9);
    let alpha = c.real("alpha", 0.5 * (1.0 - delta));
    if !(0.0..=1.0 - delta).contains(&alpha) {
        c.err(
            "alpha",
            format!("{alpha} is outside [0, 1 - delta] = [0, {}]", 1.0 - delta),
        );
    }
    let trials = c.count("trials", 10_000);
    if trials < 1 {
        c.err("trials", "must be at least 1");
    }
    let n_obs = c.count("n_obs", 1);
    if n_obs < 1 {
        c.err("n_obs", "must be at least 1");
    }
    let seed = c.count("seed", 0);
    let base_id = c.count("base_id", 0);
    let nodes = c.count("nodes", 0);
    if nodes != 0 && nodes < 16 {
        c.err("nodes", "must be at least 16 (or omitted)");
    }
    let truth = parse_truth(&mut c);
    let rules = parse_rules(&mut c);
    let grid = parse_grid(&mut c);
    let source = match c.string("source").as_deref() {
        None | Some("posterior") => PredictiveSource::Posterior,
        Some("point-mass-at-truth") => PredictiveSource::PointMassAtTruth,
        Some(s) => {
            c.err(
                "source",
                format!("'{s}' is not 'posterior' or 'point-mass-at-truth'"),
            );
            PredictiveSource::Posterior
        }
    };
    let allow_failures = c.flag("allow_failures");
    let emit_plot = c.flag("emit_plot");
    let output = c
        .string("output")
        .unwrap_or_else(|| command.map(|k| k.label().to_string()).unwrap_or_default());
    if output.is_empty() && command.is_some() {
        c.err("output", "must not be empty");
    }

    // command-specific requirements
    if let (Some(cmd), Some(fam)) = (command, &family) {
        let dim = fam.dim();
        let joint = matches!(fam.as_location_scale().map(|l| l.pin()), Some(Pin::Joint));
        let n_data = match &data {
            Some(DataSpec::Values(v)) => Some(v.len()),
            Some(DataSpec::Generate { n, .. }) => Some(*n),
            None => None,
        };
        if let Some(DataSpec::Generate { theta, .. }) = &data {
            if theta.len() != dim {
                c.err(
                    "data.generate.theta",
                    format!(
                        "family '{family_label}' takes {dim} parameter(s), got {}",
                        theta.len()
                    ),
                );
            }
        }
        let one_dim = |c: &mut Checker| {
            if dim != 1 {
                c.err(
                    "family",
                    format!(
                        "command '{}' needs a one-parameter family, '{family_label}' has {dim}",
                        cmd.label()
                    ),
                );
            }
        };
        match cmd {
            Command::Posterior => {
                if n_data.unwrap_or(0) == 0 {
                    c.err("data", "posterior needs at least one observation");
                }
            }
            Command::Coverage | Command::Pit => {
                one_dim(&mut c);
                if truth.is_none() {
                    c.err("truth", format!("{} needs a true parameter", cmd.label()));
                }
                if cmd == Command::Pit && !matches!(truth, None | Some(Truth::Fixed { .. })) {
                    c.err("truth", "pit needs a single fixed true parameter");
                }
            }
            Command::Fiducial => {
                one_dim(&mut c);
                if n_data != Some(1) {
                    c.err("data", "fiducial needs exactly one observation");
                }
            }
            Command::ComparePriors => {
                if !joint {
                    c.err(
                        "family",
                        format!("compare-priors needs a joint (μ, σ) family, got '{family_label}'"),
                    );
                }
                if n_data.unwrap_or(0) < 2 {
                    c.err("data", "compare-priors needs at least two observations");
                }
            }
            Command::Reduce => {
                one_dim(&mut c);
                if group.is_none() && fam.group().is_none() {
                    c.err("group", "reduce needs a group (the family declares none)");
                }
            }
        }
    }

    if !c.errors.is_empty() {
        return Err(c.errors);
    }
    Ok(ExperimentConfig {
        command: command.expect("checked"),
        family: family_label,
        group,
        factor,
        factor_mode,
        data,
        alpha,
        delta,
        trials: trials as usize,
        n_obs: n_obs as usize,
        seed,
        base_id,
        truth,
        rules,
        grid,
        source,
        nodes: nodes as usize,
        allow_failures,
        output,
        emit_plot,
    })
}

pub fn validate(text: &str) -> Result<ExperimentConfig, Vec<FieldError>> {
    validate_with(text, &Overrides::default())
}
