//! Scenario files and the command implementations behind `platoon-risk`.
//!
//! Exit codes: 0 success, 1 instability or degeneracy, 2 input error,
//! 3 statistical failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::graph::Graph;
use crate::risk::{conditional_expectation, risk_lower_bound, risk_profile, AmbiguitySet, SystemicLevelSet};
use crate::simulate::{
    empirical_conditional_expectation, empirical_covariance, simulate_platoon, SimConfig,
};
use crate::stability::{mode_verdicts, require_stable};
use crate::statistics::{distance_covariance_with_tol, DistanceStatistics, PlatoonParams, DEFAULT_TOL};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest platoon accepted by `validate`.
pub const VALIDATE_MAX_N: usize = 10;
/// Replicates used by `validate` unless overridden.
pub const VALIDATE_REPLICATES: usize = 20_000;
const Z_LIMIT: f64 = 3.0;

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNSTABLE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_STATISTICAL: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Complete,
    Path,
    Pcycle,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub kind: TopologyKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// 1-based `(a, b, weight)` triples for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub tau: f64,
    pub beta: f64,
    pub d: f64,
    pub g0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRisk {
    /// 1-based conditioning pair.
    pub i: usize,
    pub delta_i: f64,
    pub c: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub topology: Topology,
    pub params: ScenarioParams,
    pub risk: ScenarioRisk,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimOverrides>,
}

/// A validated scenario with everything derived from it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub graph: Graph,
    pub params: PlatoonParams,
    pub level: SystemicLevelSet,
    pub ambiguity: AmbiguitySet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnstableParameters(_) => EXIT_UNSTABLE,
            Error::InvalidParameter(_) | Error::NotConnected { .. } | Error::OutOfDomain { .. } => EXIT_INPUT,
            Error::InsufficientSamples { .. }
            | Error::InsufficientConditioningMass { .. }
            | Error::Quadrature(_) => EXIT_STATISTICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::input(format!("i/o error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses scenario JSON, reporting the offending field path on failure.
pub fn parse_scenario(text: &str) -> CliResult<Value> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::input(format!("malformed JSON: {e}")))?;
    scenario_from_value(&value)?;
    Ok(value)
}

fn scenario_from_value(value: &Value) -> CliResult<Scenario> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::input(format!("scenario field `{path}`: {}", e.into_inner()))
    })
}

impl Scenario {
    pub fn prepare(self) -> CliResult<Prepared> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::input(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let t = &self.topology;
        let weight = t.weight.unwrap_or(1.0);
        let field = |name: &str, e: Error| CliError::input(format!("scenario field `{name}`: {e}"));
        let graph = match t.kind {
            TopologyKind::Complete => Graph::complete(t.n, weight),
            TopologyKind::Path => Graph::path(t.n, weight),
            TopologyKind::Pcycle => {
                let p = t.p.ok_or_else(|| CliError::input("scenario field `topology.p`: required for pcycle"))?;
                Graph::p_cycle(t.n, p, weight)
            }
            TopologyKind::Custom => {
                let edges = t
                    .edges
                    .as_ref()
                    .ok_or_else(|| CliError::input("scenario field `topology.edges`: required for custom"))?;
                Graph::from_edges(t.n, edges)
            }
        }
        .map_err(|e| field("topology", e))?;
        let s = &self.params;
        let params = PlatoonParams::new(s.tau, s.beta, s.d, s.g0).map_err(|e| field("params", e))?;
        let r = &self.risk;
        if r.i == 0 || r.i >= t.n {
            return Err(CliError::input(format!(
                "scenario field `risk.i`: pair {} outside 1..={}",
                r.i,
                t.n - 1
            )));
        }
        let level = SystemicLevelSet::new(s.d, r.delta_i, r.c).map_err(|e| field("risk", e))?;
        let ambiguity = AmbiguitySet::scalar(s.g0, r.eps).map_err(|e| field("risk.eps", e))?;
        Ok(Prepared {
            scenario: self,
            graph,
            params,
            level,
            ambiguity,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "platoon-risk", version, about = "Cascading soft-failure risk for delayed, noisy vehicle platoons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-mode stability table and overall verdict.
    Stability(CommonArgs),
    /// Steady-state covariance and correlation of the inter-vehicle distances.
    Covariance(CommonArgs),
    /// Robust cascading risk of every pair given a soft failure of pair i.
    RiskProfile(CommonArgs),
    /// Analytic formulas against Monte Carlo (n <= 10).
    Validate(ValidateArgs),
    /// Terminal distance vectors of independent replicates.
    Simulate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `field=v1,v2,...`; writes one file per value (requires --out).
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Absolute tolerance of the covariance integrals.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Test hook: scales the analytic covariance by (1 + x) before comparing.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub perturb_sigma: f64,
}

/// Runs a parsed command; diagnostics go to `err`, CSV to `out` or files.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<u8> {
    let (common, perturb) = match &cli.command {
        Command::Validate(v) => (&v.common, v.perturb_sigma),
        Command::Stability(c) | Command::Covariance(c) | Command::RiskProfile(c) | Command::Simulate(c) => (c, 0.0),
    };
    let text = fs::read_to_string(&common.scenario)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", common.scenario.display())))?;
    let base = parse_scenario(&text)?;

    let variants = match &common.sweep {
        None => vec![(base, common.out.clone())],
        Some(spec) => {
            let target = common
                .out
                .as_ref()
                .ok_or_else(|| CliError::input("--sweep requires --out"))?;
            expand_sweep(&base, spec, target)?
        }
    };
    // Validate every variant before producing any output.
    let prepared = variants
        .into_iter()
        .map(|(value, path)| Ok((scenario_from_value(&value)?.prepare()?, path)))
        .collect::<CliResult<Vec<_>>>()?;

    let mut worst = EXIT_OK;
    for (p, path) in &prepared {
        let code = match &cli.command {
            Command::Stability(_) => cmd_stability(p, path.as_deref(), out, err)?,
            Command::Covariance(_) => cmd_covariance(p, common, path.as_deref(), out)?,
            Command::RiskProfile(_) => cmd_risk_profile(p, common, path.as_deref(), out, err)?,
            Command::Validate(_) => cmd_validate(p, common, perturb, path.as_deref(), out, err)?,
            Command::Simulate(_) => cmd_simulate(p, common, path.as_deref(), out)?,
        };
        worst = worst.max(code);
    }
    Ok(worst)
}

const SECTIONS: [(&str, &[&str]); 4] = [
    ("topology", &["n", "p", "weight"]),
    ("params", &["tau", "beta", "d", "g0"]),
    ("risk", &["i", "delta_i", "c", "eps"]),
    ("sim", &["dt", "burn_in", "horizon", "replicates", "seed"]),
];

/// Expands `field=v1,v2,...` into scenario variants and output paths.
/// `field` is either `section.key` or a bare key such as `delta_i`.
pub fn expand_sweep(base: &Value, spec: &str, out: &Path) -> CliResult<Vec<(Value, Option<PathBuf>)>> {
    let (field, list) = spec
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("--sweep `{spec}` is not field=list")))?;
    let (section, key) = match field.split_once('.') {
        Some((s, k)) => (s, k),
        None => SECTIONS
            .iter()
            .find(|(_, keys)| keys.contains(&field))
            .map(|(s, _)| (*s, field))
            .ok_or_else(|| CliError::input(format!("--sweep: unknown field `{field}`")))?,
    };
    if !SECTIONS.iter().any(|(s, keys)| *s == section && keys.contains(&key)) {
        return Err(CliError::input(format!("--sweep: unknown field `{field}`")));
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    list.split(',')
        .map(|raw| {
            let raw = raw.trim();
            let v: Value = serde_json::from_str(raw)
                .map_err(|_| CliError::input(format!("--sweep: `{raw}` is not a number")))?;
            if !v.is_number() {
                return Err(CliError::input(format!("--sweep: `{raw}` is not a number")));
            }
            let mut scenario = base.clone();
            let obj = scenario
                .as_object_mut()
                .ok_or_else(|| CliError::input("scenario must be a JSON object"))?;
            let sec = obj
                .entry(section.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
            sec.as_object_mut()
                .ok_or_else(|| CliError::input(format!("scenario field `{section}` must be an object")))?
                .insert(key.to_string(), v);
            let path = out.with_file_name(format!("{stem}_{key}{raw}.{ext}"));
            Ok((scenario, Some(path)))
        })
        .collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn emit(path: Option<&Path>, out: &mut dyn Write, body: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, body)?,
        None => out.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn cmd_stability(p: &Prepared, path: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<u8> {
    let spec = p.graph.spectral()?;
    let verdicts = mode_verdicts(&spec, p.params.tau, p.params.beta)?;
    let opt = |x: Option<f64>| x.map(fmt).unwrap_or_else(|| "nan".into());
    let mut body = String::from("k,lambda,s1,s2,a,s2_limit,stable\n");
    for m in &verdicts {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.k,
            fmt(m.lambda),
            fmt(m.s1),
            fmt(m.s2),
            opt(m.a),
            opt(m.s2_limit),
            m.stable
        ));
    }
    emit(path, out, &body)?;
    let stable = verdicts.iter().all(|m| m.stable);
    writeln!(err, "verdict: {}", if stable { "stable" } else { "unstable" })?;
    Ok(if stable { EXIT_OK } else { EXIT_UNSTABLE })
}

fn tolerance(common: &CommonArgs) -> CliResult<f64> {
    let tol = common.tol.unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::input(format!("--tol {tol} must be positive")));
    }
    Ok(tol)
}

fn analytic_statistics(p: &Prepared, common: &CommonArgs) -> CliResult<DistanceStatistics> {
    let spec = p.graph.spectral()?;
    require_stable(&spec, p.params.tau, p.params.beta)?;
    Ok(distance_covariance_with_tol(&spec, &p.params, tolerance(common)?)?)
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut body = String::from("pair");
    for j in 1..=m.ncols() {
        body.push_str(&format!(",{j}"));
    }
    body.push('\n');
    for i in 0..m.nrows() {
        body.push_str(&(i + 1).to_string());
        for j in 0..m.ncols() {
            body.push(',');
            body.push_str(&fmt(m[(i, j)]));
        }
        body.push('\n');
    }
    body
}

/// Σ goes to `path` (or stdout), ρ to `<stem>_rho.<ext>` (or stdout after a blank line).
fn cmd_covariance(p: &Prepared, common: &CommonArgs, path: Option<&Path>, out: &mut dyn Write) -> CliResult<u8> {
    let stats = analytic_statistics(p, common)?;
    let sigma = matrix_csv(&stats.sigma);
    let rho = matrix_csv(&stats.rho);
    match path {
        Some(path) => {
            fs::write(path, sigma)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("covariance");
            let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
            fs::write(path.with_file_name(format!("{stem}_rho.{ext}")), rho)?;
        }
        None => write!(out, "{sigma}\n{rho}")?,
    }
    Ok(EXIT_OK)
}

fn cmd_risk_profile(
    p: &Prepared,
    common: &CommonArgs,
    path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<u8> {
    let stats = analytic_statistics(p, common)?;
    let i = p.scenario.risk.i;
    let profile = risk_profile(&stats, i, &p.level, &p.ambiguity)?;
    let bound = risk_lower_bound(&stats.sigma, p.ambiguity.eps(), p.params.d, p.level.d_star)?;
    let mut body = String::from("j,rho_ji,worst_case_expectation,risk,lower_bound\n");
    for e in &profile.entries {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            e.j,
            fmt(e.rho_ji),
            fmt(e.worst_case_expectation),
            fmt(e.risk),
            fmt(bound)
        ));
    }
    emit(path, out, &body)?;
    let degenerate: Vec<String> = profile
        .entries
        .iter()
        .filter(|e| e.degenerate)
        .map(|e| e.j.to_string())
        .collect();
    if degenerate.is_empty() {
        Ok(EXIT_OK)
    } else {
        writeln!(
            err,
            "degenerate: worst-case expectation not positive for pairs {}",
            degenerate.join(", ")
        )?;
        Ok(EXIT_UNSTABLE)
    }
}

fn sim_config(p: &Prepared, common: &CommonArgs, default_replicates: Option<usize>) -> CliResult<SimConfig> {
    let mut cfg = SimConfig::defaults(&p.graph, &p.params)?;
    if let Some(r) = default_replicates {
        cfg.replicates = r;
    }
    if let Some(o) = &p.scenario.sim {
        cfg.dt = o.dt.unwrap_or(cfg.dt);
        cfg.burn_in = o.burn_in.unwrap_or(cfg.burn_in);
        cfg.horizon = o.horizon.unwrap_or(if o.burn_in.is_some() { 2.0 * cfg.burn_in } else { cfg.horizon });
        cfg.replicates = o.replicates.unwrap_or(cfg.replicates);
        cfg.seed = o.seed.unwrap_or(cfg.seed);
    }
    cfg.replicates = common.replicates.unwrap_or(cfg.replicates);
    cfg.seed = common.seed.unwrap_or(cfg.seed);
    Ok(cfg)
}

fn cmd_simulate(p: &Prepared, common: &CommonArgs, path: Option<&Path>, out: &mut dyn Write) -> CliResult<u8> {
    let cfg = sim_config(p, common, None)?;
    let ens = simulate_platoon(&p.graph, &p.params, &cfg)?;
    let mut body = Vec::new();
    ens.write_csv(&mut body)?;
    match path {
        Some(p) => fs::write(p, body)?,
        None => out.write_all(&body)?,
    }
    Ok(EXIT_OK)
}

fn cmd_validate(
    p: &Prepared,
    common: &CommonArgs,
    perturb: f64,
    path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<u8> {
    let n = p.graph.n();
    if n > VALIDATE_MAX_N {
        return Err(CliError::input(format!(
            "validate is limited to n <= {VALIDATE_MAX_N}, got {n}"
        )));
    }
    let mut stats = analytic_statistics(p, common)?;
    if perturb != 0.0 {
        let sigma = &stats.sigma * (1.0 + perturb);
        stats = DistanceStatistics::from_covariance(sigma, stats.d, stats.g)?;
    }
    let cfg = sim_config(p, common, Some(VALIDATE_REPLICATES))?;
    let ens = simulate_platoon(&p.graph, &p.params, &cfg)?;
    let est = empirical_covariance(&ens)?;

    let mut body = String::from("quantity,i,j,analytic,empirical,std_err,z\n");
    let mut failed = false;
    let mut row = |body: &mut String, q: &str, i: usize, j: usize, a: f64, e: f64, se: f64| {
        let z = (e - a) / se;
        failed |= z.is_nan() || z.abs() > Z_LIMIT;
        body.push_str(&format!("{q},{i},{j},{},{},{},{}\n", fmt(a), fmt(e), fmt(se), fmt(z)));
    };
    for a in 0..n - 1 {
        for b in a..n - 1 {
            row(&mut body, "covariance", a + 1, b + 1, stats.sigma[(a, b)], est.cov[(a, b)], est.std_err[(a, b)]);
        }
    }
    let i = p.scenario.risk.i;
    let d_star = p.level.d_star;
    let mut short = Vec::new();
    for j in (1..n).filter(|&j| j != i) {
        match empirical_conditional_expectation(&ens, i, j, d_star) {
            Ok(c) => {
                let analytic = conditional_expectation(
                    stats.d,
                    stats.std_dev(i - 1),
                    stats.std_dev(j - 1),
                    stats.rho[(j - 1, i - 1)],
                    d_star,
                )?;
                row(&mut body, "conditional_expectation", i, j, analytic, c.estimate, c.std_err);
            }
            Err(e @ Error::InsufficientConditioningMass { .. }) => {
                writeln!(err, "pair ({i}, {j}): {e}")?;
                short.push(j);
            }
            Err(e) => return Err(e.into()),
        }
    }
    emit(path, out, &body)?;
    if failed || !short.is_empty() {
        writeln!(err, "validation failed")?;
        return Ok(EXIT_STATISTICAL);
    }
    writeln!(err, "validation passed: all |z| <= {Z_LIMIT}")?;
    Ok(EXIT_OK)
}
