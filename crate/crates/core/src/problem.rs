//! Problem files, the `run` driver and its output files.
//!
//! A problem file is TOML with schema tag `gaussian-ngd/problem/v1`:
//!
//! ```toml
//! schema = "gaussian-ngd/problem/v1"
//! name = "example"
//! dimension = 2
//!
//! [initial]
//! form = "mean_precision"          # or mean_covariance, natural (eta1 = [...])
//! mean = [0.0, 0.0]
//! vech = [1.0, 0.0, 1.0]           # or matrix = [[...], ...]
//!
//! [rule]                            # optional
//! kind = "gauss_hermite"            # or monte_carlo (samples = ..., seed = ...)
//! order = 5
//!
//! [config]                          # optional
//! max_iters = 50
//! rel_tol = 1e-8
//! step_scale = 1.0
//! jitter = 0.0
//!
//! [[factor]]
//! id = "prior"
//! indices = [0, 1]
//! kind = "gaussian_quadratic"       # mean, precision
//! mean = [0.0, 0.0]
//! precision = [[1.0, 0.0], [0.0, 1.0]]
//! ```
//!
//! Other factor kinds: `logistic_bernoulli` (`features`, `label` 0 or 1),
//! `nonlinear_range` (`landmark`, `distance`, `variance`) and `polynomial`
//! (`terms = [{ coeff = .., powers = [..] }, ..]`).
//!
//! `run` writes three files: `trace.csv`, `estimate.toml` (which parses as an
//! `--init` file) and `manifest.toml`. Numbers in the trace and estimate are
//! written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::factors::{optimize_factored, Factor, FactorGraph};
use crate::gaussian::{GaussianDistribution, MeanCovariance, MeanPrecision, NaturalForm};
use crate::kronmat::{half_len, SymmetricMatrix, SYMMETRY_TOL};
use crate::ngd::{IterationTrace, NgdConfig, NgdOutcome, Termination};
use crate::quadrature::{ExpectationRule, RuleKind, DEFAULT_NODE_BUDGET};
use crate::vloss::Phi;

pub const PROBLEM_SCHEMA: &str = "gaussian-ngd/problem/v1";
pub const ESTIMATE_SCHEMA: &str = "gaussian-ngd/estimate/v1";
pub const MANIFEST_SCHEMA: &str = "gaussian-ngd/manifest/v1";

pub const TRACE_FILE: &str = "trace.csv";
pub const ESTIMATE_FILE: &str = "estimate.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

pub const BUNDLED: [(&str, &str); 4] = [
    ("scalar_gaussian", include_str!("../problems/scalar_gaussian.problem")),
    ("linear_chain", include_str!("../problems/linear_chain.problem")),
    ("logistic_1d", include_str!("../problems/logistic_1d.problem")),
    ("range_slam_toy", include_str!("../problems/range_slam_toy.problem")),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    schema: String,
    name: Option<String>,
    dimension: usize,
    initial: RawInitial,
    rule: Option<RawRule>,
    config: Option<RawConfig>,
    #[serde(default, rename = "factor")]
    factors: Vec<RawFactor>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    form: String,
    mean: Option<Vec<f64>>,
    eta1: Option<Vec<f64>>,
    matrix: Option<Vec<Vec<f64>>>,
    vech: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    kind: Option<String>,
    order: Option<usize>,
    samples: Option<usize>,
    seed: Option<u64>,
    budget: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    max_iters: Option<usize>,
    rel_tol: Option<f64>,
    step_scale: Option<f64>,
    jitter: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    id: String,
    indices: Vec<usize>,
    kind: String,
    mean: Option<Vec<f64>>,
    precision: Option<Vec<Vec<f64>>>,
    features: Option<Vec<f64>>,
    label: Option<u8>,
    landmark: Option<Vec<f64>>,
    distance: Option<f64>,
    variance: Option<f64>,
    terms: Option<Vec<PolyTerm>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Concrete `phi_k` families a problem file can name.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiKind {
    /// `1/2 (x - m)^T P (x - m)`, `P` symmetric positive semidefinite.
    GaussianQuadratic { mean: DVector<f64>, precision: DMatrix<f64> },
    /// `softplus(a^T x) - y a^T x`.
    LogisticBernoulli { features: DVector<f64>, label: u8 },
    /// `(|x - l| - d)^2 / (2 v)`.
    NonlinearRange { landmark: DVector<f64>, distance: f64, variance: f64 },
    /// `sum_t c_t prod_i x_i^p_ti`.
    Polynomial { terms: Vec<PolyTerm> },
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl PhiKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhiKind::GaussianQuadratic { .. } => "gaussian_quadratic",
            PhiKind::LogisticBernoulli { .. } => "logistic_bernoulli",
            PhiKind::NonlinearRange { .. } => "nonlinear_range",
            PhiKind::Polynomial { .. } => "polynomial",
        }
    }

    pub fn to_phi(&self) -> Phi {
        match self.clone() {
            PhiKind::GaussianQuadratic { mean, precision } => Arc::new(move |x| {
                let d = DVector::from_column_slice(x) - &mean;
                0.5 * d.dot(&(&precision * &d))
            }),
            PhiKind::LogisticBernoulli { features, label } => Arc::new(move |x| {
                let z: f64 = features.iter().zip(x).map(|(a, b)| a * b).sum();
                softplus(z) - f64::from(label) * z
            }),
            PhiKind::NonlinearRange { landmark, distance, variance } => Arc::new(move |x| {
                let r = landmark.iter().zip(x).map(|(l, v)| (v - l).powi(2)).sum::<f64>().sqrt();
                (r - distance).powi(2) / (2.0 * variance)
            }),
            PhiKind::Polynomial { terms } => Arc::new(move |x| {
                terms
                    .iter()
                    .map(|t| t.coeff * t.powers.iter().zip(x).map(|(&p, v)| v.powi(p as i32)).product::<f64>())
                    .sum()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub id: String,
    pub indices: Vec<usize>,
    pub kind: PhiKind,
}

/// A parsed problem file.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub dimension: usize,
    pub initial: GaussianDistribution,
    pub factors: Vec<FactorSpec>,
    pub config: NgdConfig,
}

fn field_err(context: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{context}: {msg}"))
}

fn dense_rows(rows: &[Vec<f64>], n: usize, context: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(field_err(context, format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn initial_from_raw(raw: &RawInitial, n: usize) -> Result<GaussianDistribution> {
    let matrix = match (&raw.matrix, &raw.vech) {
        (Some(rows), None) => SymmetricMatrix::from_dense(&dense_rows(rows, n, "initial.matrix")?)
            .map_err(|e| field_err("initial.matrix", e))?,
        (None, Some(h)) => {
            if h.len() != half_len(n) {
                return Err(field_err("initial.vech", format!("expected {} entries", half_len(n))));
            }
            SymmetricMatrix::from_half(h.clone(), n)?
        }
        _ => return Err(field_err("initial", "give exactly one of `matrix` or `vech`")),
    };
    let vector = |v: &Option<Vec<f64>>, key: &str| -> Result<DVector<f64>> {
        match v {
            Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
            Some(v) => Err(field_err(&format!("initial.{key}"), format!("expected {n} entries, got {}", v.len()))),
            None => Err(field_err("initial", format!("form `{}` needs `{key}`", raw.form))),
        }
    };
    let wrap = |e: Error| field_err("initial", e);
    Ok(match raw.form.as_str() {
        "mean_covariance" => MeanCovariance::new(vector(&raw.mean, "mean")?, matrix).map_err(wrap)?.into(),
        "mean_precision" => MeanPrecision::new(vector(&raw.mean, "mean")?, matrix).map_err(wrap)?.into(),
        "natural" => NaturalForm::new(vector(&raw.eta1, "eta1")?, matrix).map_err(wrap)?.into(),
        other => {
            return Err(field_err(
                "initial.form",
                format!("unknown form `{other}` (expected mean_covariance, mean_precision or natural)"),
            ))
        }
    })
}

fn factor_from_raw(raw: RawFactor, n: usize) -> Result<FactorSpec> {
    let ctx = format!("factor '{}'", raw.id);
    if raw.indices.is_empty() {
        return Err(field_err(&ctx, "indices must not be empty"));
    }
    if let Some(&i) = raw.indices.iter().find(|&&i| i >= n) {
        return Err(field_err(&ctx, format!("index {i} is out of range for dimension {n}")));
    }
    let k = raw.indices.len();
    let need = |v: Option<Vec<f64>>, key: &str| -> Result<DVector<f64>> {
        match v {
            Some(v) if v.len() == k => Ok(DVector::from_vec(v)),
            Some(v) => Err(field_err(&ctx, format!("`{key}` has {} entries but the factor has {k} indices", v.len()))),
            None => Err(field_err(&ctx, format!("kind `{}` needs `{key}`", raw.kind))),
        }
    };
    let scalar = |v: Option<f64>, key: &str| v.ok_or_else(|| field_err(&ctx, format!("kind `{}` needs `{key}`", raw.kind)));
    let used: Vec<&str> = [
        ("mean", raw.mean.is_some()),
        ("precision", raw.precision.is_some()),
        ("features", raw.features.is_some()),
        ("label", raw.label.is_some()),
        ("landmark", raw.landmark.is_some()),
        ("distance", raw.distance.is_some()),
        ("variance", raw.variance.is_some()),
        ("terms", raw.terms.is_some()),
    ]
    .into_iter()
    .filter_map(|(key, set)| set.then_some(key))
    .collect();
    let allowed: &[&str] = match raw.kind.as_str() {
        "gaussian_quadratic" => &["mean", "precision"],
        "logistic_bernoulli" => &["features", "label"],
        "nonlinear_range" => &["landmark", "distance", "variance"],
        "polynomial" => &["terms"],
        other => {
            return Err(field_err(
                &ctx,
                format!(
                    "unknown kind `{other}` (expected gaussian_quadratic, logistic_bernoulli, nonlinear_range or polynomial)"
                ),
            ))
        }
    };
    if let Some(extra) = used.iter().find(|u| !allowed.contains(u)) {
        return Err(field_err(&ctx, format!("`{extra}` does not apply to kind `{}`", raw.kind)));
    }
    let kind = match raw.kind.as_str() {
        "gaussian_quadratic" => {
            let mean = need(raw.mean, "mean")?;
            let rows = raw.precision.ok_or_else(|| field_err(&ctx, "kind `gaussian_quadratic` needs `precision`"))?;
            let precision = dense_rows(&rows, k, &format!("{ctx} precision"))?;
            let scale = precision.amax().max(1.0);
            if (&precision - precision.transpose()).amax() > SYMMETRY_TOL * scale {
                return Err(field_err(&ctx, "precision is not symmetric"));
            }
            if precision.symmetric_eigenvalues().min() < -1e-12 * scale {
                return Err(field_err(&ctx, "precision is not positive semidefinite"));
            }
            PhiKind::GaussianQuadratic { mean, precision }
        }
        "logistic_bernoulli" => {
            let features = need(raw.features, "features")?;
            let label = raw.label.ok_or_else(|| field_err(&ctx, "kind `logistic_bernoulli` needs `label`"))?;
            if label > 1 {
                return Err(field_err(&ctx, format!("label must be 0 or 1, got {label}")));
            }
            PhiKind::LogisticBernoulli { features, label }
        }
        "nonlinear_range" => {
            let landmark = need(raw.landmark, "landmark")?;
            let distance = scalar(raw.distance, "distance")?;
            let variance = scalar(raw.variance, "variance")?;
            if variance.is_nan() || variance <= 0.0 || distance.is_nan() || distance < 0.0 {
                return Err(field_err(&ctx, "range needs distance >= 0 and variance > 0"));
            }
            PhiKind::NonlinearRange { landmark, distance, variance }
        }
        _ => {
            let terms = raw.terms.ok_or_else(|| field_err(&ctx, "kind `polynomial` needs `terms`"))?;
            if let Some(t) = terms.iter().find(|t| t.powers.len() != k) {
                return Err(field_err(
                    &ctx,
                    format!("term has {} powers but the factor has {k} indices", t.powers.len()),
                ));
            }
            PhiKind::Polynomial { terms }
        }
    };
    Ok(FactorSpec { id: raw.id, indices: raw.indices, kind })
}

fn rule_from_raw(raw: Option<RawRule>, default: ExpectationRule) -> Result<ExpectationRule> {
    let Some(raw) = raw else { return Ok(default) };
    let kind = match raw.kind.as_deref() {
        None => default.kind,
        Some(s) => parse_rule_kind(s).map_err(|e| field_err("rule.kind", e))?,
    };
    let budget = raw.budget.unwrap_or(DEFAULT_NODE_BUDGET);
    let rule = match kind {
        RuleKind::GaussHermite => {
            if raw.samples.is_some() {
                return Err(field_err("rule", "`samples` applies to monte_carlo; use `order`"));
            }
            let order = raw.order.unwrap_or(if default.kind == kind { default.order } else { 5 });
            ExpectationRule::gauss_hermite(order).map_err(|e| field_err("rule.order", e))?
        }
        RuleKind::MonteCarlo => {
            if raw.order.is_some() {
                return Err(field_err("rule", "`order` applies to gauss_hermite; use `samples`"));
            }
            let samples = raw.samples.unwrap_or(crate::quadrature::DEFAULT_MONTE_CARLO_SAMPLES);
            ExpectationRule::monte_carlo(samples, raw.seed.unwrap_or(0)).map_err(|e| field_err("rule.samples", e))?
        }
    };
    Ok(ExpectationRule { seed: raw.seed.unwrap_or(rule.seed), ..rule }.with_budget(budget))
}

pub fn parse_rule_kind(s: &str) -> Result<RuleKind> {
    match s {
        "gauss_hermite" | "gh" => Ok(RuleKind::GaussHermite),
        "monte_carlo" | "mc" => Ok(RuleKind::MonteCarlo),
        other => Err(Error::Config(format!("unknown rule `{other}` (expected gauss_hermite or monte_carlo)"))),
    }
}

fn toml_err(e: toml::de::Error) -> Error {
    Error::Parse(e.to_string().trim_end().to_string())
}

impl Problem {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawProblem = toml::from_str(text).map_err(toml_err)?;
        if raw.schema != PROBLEM_SCHEMA {
            return Err(field_err("schema", format!("expected `{PROBLEM_SCHEMA}`, got `{}`", raw.schema)));
        }
        let n = raw.dimension;
        if n == 0 {
            return Err(field_err("dimension", "must be at least 1"));
        }
        let initial = initial_from_raw(&raw.initial, n)?;
        let mut seen = std::collections::BTreeSet::new();
        let mut factors = Vec::with_capacity(raw.factors.len());
        for f in raw.factors {
            if !seen.insert(f.id.clone()) {
                return Err(field_err(&format!("factor '{}'", f.id), "duplicate id"));
            }
            factors.push(factor_from_raw(f, n)?);
        }
        if factors.is_empty() {
            return Err(field_err("factor", "a problem needs at least one factor"));
        }
        let arity = factors.iter().map(|f| f.indices.len()).max().unwrap_or(1);
        let mut config = NgdConfig::with_rule(rule_from_raw(raw.rule, ExpectationRule::default_for_dim(arity))?);
        if let Some(c) = raw.config {
            config.max_iters = c.max_iters.unwrap_or(config.max_iters);
            config.rel_tol = c.rel_tol.unwrap_or(config.rel_tol);
            config.step_scale = c.step_scale.unwrap_or(config.step_scale);
            config.jitter = c.jitter.unwrap_or(config.jitter);
        }
        Ok(Self { name: raw.name.unwrap_or_else(|| "unnamed".into()), dimension: n, initial, factors, config })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn bundled(name: &str) -> Result<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("no bundled problem named `{name}`")))
            .and_then(|(_, text)| Self::parse(text))
    }

    pub fn graph(&self) -> Result<FactorGraph> {
        let factors = self
            .factors
            .iter()
            .map(|f| Factor::from_phi(f.id.clone(), f.indices.clone(), f.kind.to_phi()))
            .collect::<Result<Vec<_>>>()?;
        FactorGraph::new(self.dimension, factors)
    }
}

/// Command-line values that take precedence over the problem file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub rule: Option<RuleKind>,
    /// Gauss-Hermite order, or Monte Carlo sample count.
    pub order: Option<usize>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub step_scale: Option<f64>,
    pub jitter: Option<f64>,
    /// An estimate file to start from instead of the problem's initial q.
    pub init: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, base: &NgdConfig) -> Result<NgdConfig> {
        let mut cfg = *base;
        let mut rule = cfg.rule;
        if let Some(kind) = self.rule {
            if kind != rule.kind {
                rule = match kind {
                    RuleKind::GaussHermite => ExpectationRule::gauss_hermite(crate::quadrature::DEFAULT_HERMITE_ORDER)?,
                    RuleKind::MonteCarlo => {
                        ExpectationRule::monte_carlo(crate::quadrature::DEFAULT_MONTE_CARLO_SAMPLES, rule.seed)?
                    }
                }
                .with_budget(rule.budget);
            }
        }
        if let Some(order) = self.order {
            rule.order = order;
        }
        if let Some(seed) = self.seed {
            rule.seed = seed;
        }
        cfg.rule = rule;
        cfg.max_iters = self.max_iters.unwrap_or(cfg.max_iters);
        cfg.rel_tol = self.rel_tol.unwrap_or(cfg.rel_tol);
        cfg.step_scale = self.step_scale.unwrap_or(cfg.step_scale);
        cfg.jitter = self.jitter.unwrap_or(cfg.jitter);
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
struct RawEstimate {
    schema: String,
    initial: RawInitial,
}

/// Reads the `[initial]` table of an estimate file.
pub fn parse_estimate(text: &str, dimension: usize) -> Result<GaussianDistribution> {
    let raw: RawEstimate = toml::from_str(text).map_err(toml_err)?;
    if raw.schema != ESTIMATE_SCHEMA {
        return Err(field_err("schema", format!("expected `{ESTIMATE_SCHEMA}`, got `{}`", raw.schema)));
    }
    initial_from_raw(&raw.initial, dimension)
}

/// Result of solving a problem without touching the filesystem.
#[derive(Debug, Clone)]
pub struct Solution {
    pub config: NgdConfig,
    pub initial: MeanPrecision,
    pub outcome: NgdOutcome,
}

impl Solution {
    pub fn exit_code(&self) -> i32 {
        match self.outcome.termination {
            Termination::Converged { .. } => 0,
            Termination::MaxIterations => 2,
            Termination::Failed { .. } => 1,
        }
    }
}

pub fn solve(problem: &Problem, overrides: &Overrides) -> Result<Solution> {
    let config = overrides.apply(&problem.config)?;
    let initial = match &overrides.init {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_estimate(&text, problem.dimension).map_err(|e| match e {
                Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => problem.initial.clone(),
    };
    let initial = initial.to_mean_precision()?;
    let graph = problem.graph()?;
    let outcome = optimize_factored(&graph, &initial, &config)?;
    Ok(Solution { config, initial, outcome })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn num_list(xs: &[f64]) -> String {
    let inner: Vec<String> = xs.iter().map(|&x| num(x)).collect();
    format!("[{}]", inner.join(", "))
}

pub fn trace_csv(trace: &IterationTrace, dim: usize) -> String {
    let mut out = String::from(
        "iter,value,grad_norm,converged,accepted,value_change,predicted_decrease,decrease_violation,prec_sha256",
    );
    for i in 0..dim {
        let _ = write!(out, ",mu_{i}");
    }
    out.push('\n');
    for r in &trace.records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            num(r.value),
            num(r.grad_norm),
            u8::from(r.converged),
            u8::from(r.accepted),
            num(r.value_change),
            num(r.predicted_decrease),
            u8::from(r.decrease_violation),
            r.prec_fingerprint
        );
        for m in &r.mean {
            let _ = write!(out, ",{}", num(*m));
        }
        out.push('\n');
    }
    out
}

fn termination_name(t: &Termination) -> &'static str {
    match t {
        Termination::Converged { .. } => "converged",
        Termination::MaxIterations => "max_iterations",
        Termination::Failed { .. } => "failed",
    }
}

pub fn estimate_toml(problem: &Problem, solution: &Solution) -> String {
    let out = &solution.outcome;
    let q = &out.estimate;
    let mut s = String::new();
    let _ = writeln!(s, "schema = \"{ESTIMATE_SCHEMA}\"");
    let _ = writeln!(s, "problem = {}", toml_string(&problem.name));
    let _ = writeln!(s, "termination = \"{}\"", termination_name(&out.termination));
    let _ = writeln!(s, "iterations = {}", out.trace.len().saturating_sub(1));
    if let Some(last) = out.trace.last() {
        let _ = writeln!(s, "value = {}", num(last.value));
    }
    let _ = writeln!(s, "\n[initial]");
    let _ = writeln!(s, "form = \"mean_precision\"");
    let _ = writeln!(s, "mean = {}", num_list(q.mean().as_slice()));
    let _ = writeln!(s, "vech = {}", num_list(q.prec().half()));
    s
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'a str,
    problem: &'a str,
    problem_file: String,
    problem_sha256: String,
    init_file: Option<String>,
    crate_version: &'a str,
    termination: &'a str,
    iterations: usize,
    error: Option<String>,
    wall_time_seconds: f64,
    config: ManifestConfig<'a>,
}

#[derive(Serialize)]
struct ManifestConfig<'a> {
    rule: &'a str,
    order: usize,
    seed: u64,
    budget: usize,
    max_iters: usize,
    rel_tol: f64,
    step_scale: f64,
    jitter: f64,
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, &target).map_err(|e| Error::Io(format!("{}: {e}", target.display())))?;
    Ok(target)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub solution: Solution,
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
}

/// Loads, solves and writes the three output files into `out_dir`.
pub fn run(problem_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<RunReport> {
    let started = Instant::now();
    let text =
        fs::read_to_string(problem_path).map_err(|e| Error::Io(format!("{}: {e}", problem_path.display())))?;
    let problem = Problem::parse(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", problem_path.display())),
        other => other,
    })?;
    let solution = solve(&problem, overrides)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;

    let trace = trace_csv(&solution.outcome.trace, problem.dimension);
    let estimate = estimate_toml(&problem, &solution);
    let cfg = &solution.config;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        problem: &problem.name,
        problem_file: problem_path.display().to_string(),
        problem_sha256: Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect(),
        init_file: overrides.init.as_ref().map(|p| p.display().to_string()),
        crate_version: env!("CARGO_PKG_VERSION"),
        termination: termination_name(&solution.outcome.termination),
        iterations: solution.outcome.trace.len().saturating_sub(1),
        error: match &solution.outcome.termination {
            Termination::Failed { iter, error } => Some(format!("iteration {iter}: {error}")),
            _ => None,
        },
        wall_time_seconds: started.elapsed().as_secs_f64(),
        config: ManifestConfig {
            rule: cfg.rule.kind.name(),
            order: cfg.rule.order,
            seed: cfg.rule.seed,
            budget: cfg.rule.budget,
            max_iters: cfg.max_iters,
            rel_tol: cfg.rel_tol,
            step_scale: cfg.step_scale,
            jitter: cfg.jitter,
        },
    };
    let manifest = toml::to_string(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    let files = vec![
        write_atomic(out_dir, TRACE_FILE, &trace)?,
        write_atomic(out_dir, ESTIMATE_FILE, &estimate)?,
        write_atomic(out_dir, MANIFEST_FILE, &manifest)?,
    ];
    let exit_code = solution.exit_code();
    Ok(RunReport { solution, files, exit_code })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = "gaussian-ngd/problem/v1"
dimension = 2

[initial]
form = "mean_precision"
mean = [0.0, 0.0]
vech = [1.0, 0.0, 1.0]

[[factor]]
id = "prior"
indices = [0, 1]
kind = "gaussian_quadratic"
mean = [1.0, 2.0]
precision = [[2.0, 0.5], [0.5, 1.0]]
"#;

    #[test]
    fn bundled_problems_parse() {
        for (name, _) in BUNDLED {
            let p = Problem::bundled(name).unwrap();
            assert_eq!(p.name, name);
            p.graph().unwrap();
        }
    }

    #[test]
    fn minimal_problem_defaults() {
        let p = Problem::parse(MINIMAL).unwrap();
        assert_eq!(p.config.rule, ExpectationRule::default_for_dim(2));
        assert_eq!(p.config.max_iters, NgdConfig::default().max_iters);
        let s = solve(&p, &Overrides::default()).unwrap();
        assert_eq!(s.exit_code(), 0);
        assert!((s.outcome.estimate.mean() - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_location() {
        let bad = MINIMAL.replace("dimension = 2", "dimension = \"two\"");
        let msg = Problem::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn out_of_range_index_names_factor() {
        let bad = MINIMAL.replace("indices = [0, 1]", "indices = [0, 7]");
        let msg = Problem::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("factor 'prior'") && msg.contains("index 7"), "{msg}");
    }

    #[test]
    fn unknown_kind_and_fields_rejected() {
        let bad = MINIMAL.replace("gaussian_quadratic", "cauchy");
        assert!(Problem::parse(&bad).unwrap_err().to_string().contains("unknown kind"));
        let bad = MINIMAL.replace("dimension = 2", "dimension = 2\ncolour = 1");
        assert!(Problem::parse(&bad).is_err());
        let bad = MINIMAL.replace("kind = \"gaussian_quadratic\"", "kind = \"gaussian_quadratic\"\nlabel = 1");
        assert!(Problem::parse(&bad).unwrap_err().to_string().contains("label"));
    }

    #[test]
    fn schema_and_shape_checks() {
        assert!(Problem::parse(&MINIMAL.replace("problem/v1", "problem/v0")).is_err());
        assert!(Problem::parse(&MINIMAL.replace("vech = [1.0, 0.0, 1.0]", "vech = [1.0, 0.0]")).is_err());
        assert!(Problem::parse(&MINIMAL.replace("vech = [1.0, 0.0, 1.0]", "vech = [1.0, 3.0, 1.0]")).is_err());
        assert!(Problem::parse(&MINIMAL.replace("[[2.0, 0.5], [0.5, 1.0]]", "[[2.0, 0.5], [0.4, 1.0]]")).is_err());
        assert!(Problem::parse(&MINIMAL.replace("[[2.0, 0.5], [0.5, 1.0]]", "[[-2.0, 0.0], [0.0, 1.0]]")).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let p = Problem::bundled("logistic_1d").unwrap();
        let o = Overrides {
            rule: Some(RuleKind::MonteCarlo),
            order: Some(2000),
            seed: Some(9),
            max_iters: Some(3),
            ..Overrides::default()
        };
        let cfg = o.apply(&p.config).unwrap();
        assert_eq!(cfg.rule.kind, RuleKind::MonteCarlo);
        assert_eq!((cfg.rule.order, cfg.rule.seed, cfg.max_iters), (2000, 9, 3));
        assert_eq!(cfg.rel_tol, p.config.rel_tol);
        let zero = Overrides { max_iters: Some(0), ..Overrides::default() };
        assert!(matches!(solve(&p, &zero), Err(Error::Config(_))));
    }

    #[test]
    fn phi_kinds_evaluate() {
        let logistic = PhiKind::LogisticBernoulli { features: DVector::from_vec(vec![2.0]), label: 1 }.to_phi();
        assert!((logistic(&[0.5]) - ((1.0f64).exp().ln_1p() - 1.0)).abs() < 1e-15);
        assert!(logistic(&[-800.0]).is_finite() && logistic(&[800.0]).abs() < 1e-300);
        let range = PhiKind::NonlinearRange { landmark: DVector::from_vec(vec![3.0, 4.0]), distance: 4.0, variance: 0.5 }
            .to_phi();
        assert!((range(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
        let poly = PhiKind::Polynomial {
            terms: vec![PolyTerm { coeff: 2.0, powers: vec![2, 1] }, PolyTerm { coeff: -1.0, powers: vec![0, 0] }],
        }
        .to_phi();
        assert_eq!(poly(&[3.0, 0.5]), 8.0);
    }

    #[test]
    fn estimate_round_trips_bitwise() {
        let p = Problem::bundled("logistic_1d").unwrap();
        let s = solve(&p, &Overrides::default()).unwrap();
        let text = estimate_toml(&p, &s);
        let back = parse_estimate(&text, 1).unwrap().to_mean_precision().unwrap();
        assert_eq!(back.mean(), s.outcome.estimate.mean());
        assert_eq!(back.prec(), s.outcome.estimate.prec());
    }
}
