//! Experiment runner behind the `critwalk` binary: config resolution,
//! dispatch to the core estimators, and the summary/CSV writers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use critwalk::experiments::GREEN_SCHEDULE;
use critwalk::{
    confinement_lower_bound, critical_preset, default_q, exp_moment, green_convergence,
    large_deviation_preset, rho1, rho2, sobolev_constant, tail_probability, IsoExperiment,
    Preset, SolverOptions, TestFunctional,
};

pub mod format;

/// Valid values of the `kind` key.
pub const KINDS: [&str; 7] = [
    "tail",
    "exp_moment",
    "isomorphism",
    "variational",
    "green_convergence",
    "confinement",
    "sobolev",
];

pub const DEFAULT_REPLICAS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<critwalk::Error> for CliError {
    fn from(e: critwalk::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

/// Torus side: a fixed value or `"auto"` for the critical preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SideSpec {
    Fixed(usize),
    Named(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl std::str::FromStr for SideSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(SideSpec::Named(AutoTag::Auto));
        }
        s.parse()
            .map(SideSpec::Fixed)
            .map_err(|_| format!("R must be a positive integer or \"auto\", got {s:?}"))
    }
}

/// Flat experiment description. Every key is optional so that a config file
/// and inline flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<String>,
    pub d: Option<usize>,
    pub q: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[serde(rename = "b_T")]
    pub b_t: Option<f64>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(rename = "A")]
    pub area: Option<f64>,
    #[serde(rename = "R")]
    pub side: Option<SideSpec>,
    pub lambda: Option<f64>,
    /// Shift of the isomorphism experiment.
    pub s: Option<f64>,
    /// Uniform exponential weight of the isomorphism test functional.
    pub a: Option<f64>,
    pub paired: Option<bool>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(rename = "box_L")]
    pub box_radius: Option<u64>,
    /// Box radius of the Sobolev experiment.
    #[serde(rename = "L")]
    pub sobolev_radius: Option<usize>,
    /// Torus sides of the Green convergence table.
    pub sides: Option<Vec<usize>>,
    pub tol: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        ExperimentConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return config_err("empty config");
        }
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if cfg == Self::default() {
            return config_err("empty config");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Values set in `top` win.
    pub fn overlay(self, top: Self) -> Self {
        let base = self;
        overlay!(base, top; kind, d, q, horizon, b_t, theta, alpha, area, side, lambda, s, a,
                 paired, n, seed, out, box_radius, sobolev_radius, sides, tol)
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// Everything an experiment produces, before serialization.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub kind: String,
    pub seed: u64,
    pub params: BTreeMap<String, Value>,
    pub result: Value,
    pub warnings: Vec<String>,
    pub replicas: Vec<f64>,
    /// Set when the run finished but a solver did not converge or an
    /// estimate is not finite.
    pub failure: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    kind: &'a str,
    seed: u64,
    params: &'a BTreeMap<String, Value>,
    result: &'a Value,
    warnings: &'a [String],
    status: &'a str,
    wall_time_s: f64,
}

fn require<T: Copy>(v: Option<T>, key: &str, kind: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("{kind} needs `{key}`")))
}

fn resolve_q(cfg: &ExperimentConfig, d: usize) -> Result<f64, CliError> {
    match cfg.q {
        Some(q) => Ok(q),
        None => Ok(default_q(d)?),
    }
}

fn echo_preset(params: &mut BTreeMap<String, Value>, warnings: &mut Vec<String>, p: &Preset) {
    params.insert("R".into(), json!(p.side));
    params.insert("lambda".into(), json!(p.lambda));
    params.insert("scale".into(), json!(p.scale));
    if !p.scale_ok {
        warnings.push(format!(
            "b_T R^2/T = {} < 1: the preset does not make lambda R^d large",
            p.scale
        ));
    }
}

fn unknown_kind(kind: &str) -> CliError {
    CliError::Config(format!(
        "unknown experiment kind {kind:?}; valid kinds: {}",
        KINDS.join(", ")
    ))
}

/// Resolve and run the experiment described by `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    if cfg.is_empty() {
        return config_err("empty config");
    }
    let kind = cfg
        .kind
        .clone()
        .ok_or_else(|| CliError::Config(format!("config names no kind; valid kinds: {}", KINDS.join(", "))))?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let mut out = Outcome {
        kind: kind.clone(),
        seed,
        params: BTreeMap::new(),
        result: Value::Null,
        warnings: Vec::new(),
        replicas: Vec::new(),
        failure: None,
    };
    match kind.as_str() {
        "tail" | "confinement" => run_tail(cfg, &mut out)?,
        "exp_moment" => run_exp_moment(cfg, &mut out)?,
        "isomorphism" => run_isomorphism(cfg, &mut out)?,
        "variational" => run_variational(cfg, &mut out)?,
        "sobolev" => run_sobolev(cfg, &mut out)?,
        "green_convergence" => run_green(cfg, &mut out)?,
        other => return Err(unknown_kind(other)),
    }
    Ok(out)
}

/// json! turns NaN and infinities into null, so test the raw numbers.
fn check_finite(out: &mut Outcome, values: &[(&str, f64)]) {
    if out.failure.is_some() {
        return;
    }
    if let Some((name, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
        out.failure = Some(format!("{name} is not finite ({v})"));
    }
}

fn walk_params(cfg: &ExperimentConfig, out: &mut Outcome, kind: &str) -> Result<(usize, f64, f64, usize), CliError> {
    let d = require(cfg.d, "d", kind)?;
    let horizon = require(cfg.horizon, "T", kind)?;
    let q = resolve_q(cfg, d)?;
    let n = cfg.n.unwrap_or(DEFAULT_REPLICAS);
    out.params.insert("d".into(), json!(d));
    out.params.insert("q".into(), json!(q));
    out.params.insert("T".into(), json!(horizon));
    out.params.insert("n".into(), json!(n));
    Ok((d, q, horizon, n))
}

fn run_tail(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let kind = out.kind.clone();
    let (d, q, horizon, n) = walk_params(cfg, out, &kind)?;
    let b_t = require(cfg.b_t, "b_T", &kind)?;
    let alpha = cfg.alpha.unwrap_or(1.0);
    out.params.insert("b_T".into(), json!(b_t));
    out.params.insert("alpha".into(), json!(alpha));
    let preset = critical_preset(d, horizon, b_t, alpha)?;
    echo_preset(&mut out.params, &mut out.warnings, &preset);
    if kind == "tail" {
        let e = tail_probability(d, q, horizon, b_t, n, out.seed)?;
        out.result = json!({
            "estimate": e.estimate.mean,
            "stderr": e.estimate.stderr,
            "n": e.estimate.n,
            "hits": e.hits,
            "log_rate": e.log_rate,
            "lower_95": e.lower_bound,
            "upper_95": e.upper_bound,
        });
        if e.hits == 0 {
            out.warnings
                .push("no replica reached the threshold; report upper_95, not the point estimate".into());
        }
        check_finite(out, &[("estimate", e.estimate.mean)]);
        out.replicas = e.values;
    } else {
        let box_radius = cfg.box_radius.unwrap_or(preset.side as u64);
        out.params.insert("box_L".into(), json!(box_radius));
        let e = confinement_lower_bound(d, q, horizon, b_t, box_radius, n, out.seed)?;
        out.result = json!({
            "estimate": e.bound.estimate.mean,
            "stderr": e.bound.estimate.stderr,
            "n": e.bound.estimate.n,
            "hits": e.bound.hits,
            "log_rate": e.bound.log_rate,
            "lower_95": e.bound.lower_bound,
            "upper_95": e.bound.upper_bound,
            "confinement": e.confinement.mean,
            "confinement_stderr": e.confinement.stderr,
            "accepted": e.accepted,
            "conditional": e.conditional,
        });
        if e.accepted == 0 {
            out.warnings.push("no replica stayed in the box".into());
        }
        check_finite(out, &[("estimate", e.bound.estimate.mean)]);
        out.replicas = e.bound.values;
    }
    Ok(())
}

fn run_exp_moment(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let (d, q, horizon, n) = walk_params(cfg, out, "exp_moment")?;
    let theta = require(cfg.theta, "theta", "exp_moment")?;
    out.params.insert("theta".into(), json!(theta));
    let alpha = cfg.alpha.unwrap_or(1.0);
    if let Some(b_t) = cfg.b_t {
        out.params.insert("b_T".into(), json!(b_t));
        out.params.insert("alpha".into(), json!(alpha));
        let preset = critical_preset(d, horizon, b_t, alpha)?;
        echo_preset(&mut out.params, &mut out.warnings, &preset);
    } else if let Some(area) = cfg.area {
        out.params.insert("A".into(), json!(area));
        out.params.insert("alpha".into(), json!(alpha));
        let preset = large_deviation_preset(d, q, horizon, alpha, area)?;
        out.params.insert("R".into(), json!(preset.side));
        out.params.insert("lambda".into(), json!(preset.lambda));
    }
    let e = exp_moment(d, q, horizon, theta, n, out.seed)?;
    out.result = json!({
        "estimate": e.estimate.mean,
        "stderr": e.estimate.stderr,
        "n": e.estimate.n,
        "top_share": e.top_share,
        "heavy_tail": e.heavy_tail,
    });
    if e.heavy_tail {
        out.warnings.push(format!(
            "heavy tail: the top 1% of replicas carry {:.1}% of the sum; the moment may be infinite and the estimate is not meaningful",
            100.0 * e.top_share
        ));
    }
    check_finite(out, &[("estimate", e.estimate.mean), ("stderr", e.estimate.stderr)]);
    out.replicas = e.values;
    Ok(())
}

fn fixed_side(cfg: &ExperimentConfig, kind: &str) -> Result<(usize, f64), CliError> {
    match cfg.side {
        Some(SideSpec::Fixed(side)) => Ok((side, require(cfg.lambda, "lambda", kind)?)),
        Some(SideSpec::Named(AutoTag::Auto)) => {
            let d = require(cfg.d, "d", kind)?;
            let horizon = require(cfg.horizon, "T", "R = \"auto\"")?;
            let b_t = require(cfg.b_t, "b_T", "R = \"auto\"")?;
            let p = critical_preset(d, horizon, b_t, cfg.alpha.unwrap_or(1.0))?;
            Ok((p.side, cfg.lambda.unwrap_or(p.lambda)))
        }
        None => config_err(format!("{kind} needs `R`")),
    }
}

fn run_isomorphism(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let d = require(cfg.d, "d", "isomorphism")?;
    let (side, lambda) = fixed_side(cfg, "isomorphism")?;
    let shift = cfg.s.unwrap_or(1.0);
    let weight = cfg.a.unwrap_or(0.05);
    let n = cfg.n.unwrap_or(DEFAULT_REPLICAS);
    let paired = cfg.paired.unwrap_or(false);
    for (k, v) in [
        ("d", json!(d)),
        ("R", json!(side)),
        ("lambda", json!(lambda)),
        ("s", json!(shift)),
        ("a", json!(weight)),
        ("n", json!(n)),
        ("paired", json!(paired)),
    ] {
        out.params.insert(k.into(), v);
    }
    let exp = IsoExperiment::new(d, side, lambda, shift, n, out.seed)?.paired(paired);
    let f = TestFunctional::uniform_exponential(exp.kernel.len(), weight)?;
    let lhs = exp.lhs(&f)?;
    let rhs = exp.rhs(&f)?;
    let combined = lhs.combined_stderr(&rhs);
    let gap = lhs.mean - rhs.mean;
    out.result = json!({
        "lhs": lhs.mean,
        "lhs_stderr": lhs.stderr,
        "rhs": rhs.mean,
        "rhs_stderr": rhs.stderr,
        "gap": gap,
        "combined_stderr": combined,
        "within_3_stderr": gap.abs() <= 3.0 * combined,
    });
    check_finite(out, &[("lhs", lhs.mean), ("rhs", rhs.mean)]);
    Ok(())
}

fn solver_options(cfg: &ExperimentConfig, default_tol: f64) -> SolverOptions<f64> {
    SolverOptions {
        tol: cfg.tol.unwrap_or(default_tol),
        ..SolverOptions::default()
    }
}

fn run_variational(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let d = require(cfg.d, "d", "variational")?;
    let (side, lambda) = fixed_side(cfg, "variational")?;
    let q = resolve_q(cfg, d)?;
    let opts = solver_options(cfg, 1e-10);
    for (k, v) in [
        ("d", json!(d)),
        ("R", json!(side)),
        ("lambda", json!(lambda)),
        ("q", json!(q)),
        ("tol", json!(opts.tol)),
    ] {
        out.params.insert(k.into(), v);
    }
    let r1 = rho1(d, side, lambda, q, &opts)?;
    let r2 = rho2(d, side, lambda, q, &opts)?;
    out.result = json!({
        "rho1": r1.value,
        "rho1_residual": r1.lagrange_residual,
        "rho1_iterations": r1.iterations,
        "rho2": r2.value,
        "rho2_residual": r2.lagrange_residual,
        "rho2_iterations": r2.iterations,
        "duality_gap": r1.value * r2.value - 1.0,
        "converged": r1.converged && r2.converged,
    });
    if !(r1.converged && r2.converged) {
        out.failure = Some("variational solver did not converge".into());
    }
    check_finite(out, &[("rho1", r1.value), ("rho2", r2.value)]);
    out.replicas = r1.minimizer;
    Ok(())
}

fn run_sobolev(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let d = require(cfg.d, "d", "sobolev")?;
    let radius = require(cfg.sobolev_radius, "L", "sobolev")?;
    let opts = solver_options(cfg, 1e-9);
    out.params.insert("d".into(), json!(d));
    out.params.insert("L".into(), json!(radius));
    out.params.insert("tol".into(), json!(opts.tol));
    let s = sobolev_constant(d, radius, &opts)?;
    out.result = json!({
        "value": s.value,
        "residual": s.lagrange_residual,
        "iterations": s.iterations,
        "converged": s.converged,
    });
    if !s.converged {
        out.failure = Some("Sobolev solver did not converge".into());
    }
    check_finite(out, &[("value", s.value)]);
    out.replicas = s.minimizer;
    Ok(())
}

fn run_green(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let d = cfg.d.unwrap_or(3);
    let sides = cfg.sides.clone().unwrap_or_else(|| GREEN_SCHEDULE.to_vec());
    out.params.insert("d".into(), json!(d));
    out.params.insert("sides".into(), json!(sides));
    let rows = green_convergence(d, &sides)?;
    out.replicas = rows.iter().map(|r| r.green).collect();
    out.result = json!({ "rows": rows });
    let values: Vec<(&str, f64)> = rows.iter().map(|r| ("green", r.green)).collect();
    check_finite(out, &values);
    Ok(())
}

/// Write `summary.json` and `replicas.csv` into `dir`.
pub fn write_outputs(dir: &Path, outcome: &Outcome, wall_time_s: f64) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let summary = Summary {
        kind: &outcome.kind,
        seed: outcome.seed,
        params: &outcome.params,
        result: &outcome.result,
        warnings: &outcome.warnings,
        status: if outcome.failure.is_some() { "numeric_failure" } else { "ok" },
        wall_time_s,
    };
    let mut json = format::to_json(&summary).map_err(|e| CliError::Numeric(e.to_string()))?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;

    let mut csv = io::BufWriter::new(fs::File::create(dir.join("replicas.csv"))?);
    writeln!(csv, "replica_index,value")?;
    for (i, v) in outcome.replicas.iter().enumerate() {
        writeln!(csv, "{i},{}", format::float(*v))?;
    }
    csv.flush()?;
    Ok(())
}

/// Run and write outputs; the returned error, if any, decides the exit code.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let outcome = run(cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    write_outputs(&dir, &outcome, start.elapsed().as_secs_f64())?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(f) = &outcome.failure {
        return Err(CliError::Numeric(f.clone()));
    }
    Ok(outcome)
}
