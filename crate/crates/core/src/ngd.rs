//! Natural-gradient steps and the hybrid fixed-point optimizer.
//!
//! The hybrid update in mean/precision form is
//!
//! ```text
//! Sigma^-1 <- d2V/dmu^T dmu
//! mu       <- mu - step_scale * (Sigma^-1)^-1 dV/dmu^T
//! ```
//!
//! evaluated top to bottom, so the mean step uses the new precision.

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fim::{alpha_from_eta_jacobian, coordinates, fim_inverse, from_coordinates, ParamTag};
use crate::gaussian::{GaussianDistribution, MeanCovariance, MeanPrecision};
use crate::kronmat::{duplication, vec, SymmetricMatrix};
use crate::quadrature::ExpectationRule;
use crate::vloss::{self, DerivativeBundle, LossFunctional};

/// Per-step tolerance on `V_k - V_{k-1}` before an increase is flagged.
pub const DECREASE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgdConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_scale: f64,
    pub rule: ExpectationRule,
    /// Added to the diagonal of the expected Hessian before the PD check.
    pub jitter: f64,
}

impl Default for NgdConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-8,
            step_scale: 1.0,
            rule: ExpectationRule::gauss_hermite(crate::quadrature::DEFAULT_HERMITE_ORDER)
                .expect("default order is valid"),
            jitter: 0.0,
        }
    }
}

impl NgdConfig {
    pub fn with_rule(rule: ExpectationRule) -> Self {
        Self { rule, ..Self::default() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !self.rel_tol.is_finite() || self.rel_tol <= 0.0 {
            return Err(Error::Config(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return Err(Error::Config(format!(
                "step_scale must lie in (0, 1], got {}",
                self.step_scale
            )));
        }
        if !self.jitter.is_finite() || self.jitter < 0.0 {
            return Err(Error::Config(format!("jitter must be non-negative, got {}", self.jitter)));
        }
        self.rule.validate(dim).map_err(|e| Error::Config(e.to_string()))
    }
}

/// `dV/dSigma = -Sigma^-1 (dV/dSigma^-1) Sigma^-1`.
pub fn grad_cov(prec: &DMatrix<f64>, bundle: &DerivativeBundle) -> DMatrix<f64> {
    -(prec * bundle.grad_prec.to_dense() * prec)
}

/// Canonical update: `Sigma^-1 dmu = -dV/dmu^T`, `dSigma = -2 Sigma (dV/dSigma) Sigma`.
pub fn step_canonical(q: &MeanCovariance, d: &DerivativeBundle) -> Result<MeanCovariance> {
    check_bundle(q.dim(), d)?;
    let cov = q.cov().to_dense();
    let prec = q.chol().inverse();
    let dmu = -(&cov * &d.grad_mu);
    let dcov = -(&cov * grad_cov(&prec, d) * &cov) * 2.0;
    let new_cov = SymmetricMatrix::symmetrize(&(cov + dcov))?;
    MeanCovariance::new(q.mean() + dmu, new_cov).map_err(|e| match e {
        Error::NotPositiveDefinite(m) => Error::StepRejected(format!("updated covariance: {m}")),
        other => other,
    })
}

/// Hybrid update with unit step and no jitter.
pub fn step_hybrid(q: &MeanPrecision, d: &DerivativeBundle) -> Result<MeanPrecision> {
    step_hybrid_scaled(q, d, 1.0, 0.0)
}

/// Hybrid update. `step_scale` damps the mean step only; the precision is
/// assigned `hess_mu + jitter I` outright.
pub fn step_hybrid_scaled(
    q: &MeanPrecision,
    d: &DerivativeBundle,
    step_scale: f64,
    jitter: f64,
) -> Result<MeanPrecision> {
    check_bundle(q.dim(), d)?;
    let n = q.dim();
    let mut h = d.hess_mu.to_dense();
    for i in 0..n {
        h[(i, i)] += jitter;
    }
    let new_prec = SymmetricMatrix::symmetrize(&h)?;
    let chol = match h.clone().cholesky() {
        Some(c) => c,
        None => {
            return Err(Error::IndefiniteHessian { min_eigenvalue: h.symmetric_eigenvalues().min() })
        }
    };
    let dmu = -chol.solve(&d.grad_mu);
    let mean = q.mean() + dmu * step_scale;
    MeanPrecision::new(mean, new_prec).map_err(|_| Error::IndefiniteHessian {
        min_eigenvalue: h.symmetric_eigenvalues().min(),
    })
}

fn check_bundle(n: usize, d: &DerivativeBundle) -> Result<()> {
    if d.grad_mu.len() != n || d.hess_mu.dim() != n || d.grad_prec.dim() != n {
        return Err(Error::Dimension(format!("derivative bundle does not match dimension {n}")));
    }
    Ok(())
}

/// `dV/d(coordinates)` in the tagged layout, built from a bundle by the chain
/// rule. Symmetry-aware layouts get `D^T vec(G)`.
pub fn tagged_gradient(
    q: &GaussianDistribution,
    tag: ParamTag,
    d: &DerivativeBundle,
) -> Result<DVector<f64>> {
    let n = q.dim();
    check_bundle(n, d)?;
    let prec = q.precision().to_dense();
    let stack = |first: &DVector<f64>, block: DVector<f64>| {
        let mut out = DVector::zeros(n + block.len());
        out.rows_mut(0, n).copy_from(first);
        out.rows_mut(n, block.len()).copy_from(&block);
        out
    };
    Ok(match tag {
        ParamTag::Theta => stack(&d.grad_mu, vec(&grad_cov(&prec, d))),
        ParamTag::Gamma => stack(&d.grad_mu, duplication(n)?.reduce_gradient(&grad_cov(&prec, d))),
        ParamTag::Alpha => stack(&d.grad_mu, vec(&d.grad_prec.to_dense())),
        ParamTag::Beta => stack(&d.grad_mu, duplication(n)?.reduce_gradient(&d.grad_prec.to_dense())),
        ParamTag::Eta => {
            let alpha = stack(&d.grad_mu, vec(&d.grad_prec.to_dense()));
            alpha_from_eta_jacobian(q).transpose() * alpha
        }
    })
}

/// `-I^-1 grad` in the tagged coordinates.
pub fn natural_increment(
    q: &GaussianDistribution,
    tag: ParamTag,
    grad: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = q.dim();
    if grad.len() != tag.coordinate_len(n) {
        return Err(Error::Dimension(format!(
            "{tag} gradient has length {} but dimension {n} needs {}",
            grad.len(),
            tag.coordinate_len(n)
        )));
    }
    Ok(-(fim_inverse(q, tag)?.matrix * grad))
}

/// Generic natural-gradient step `coordinates + (-I^-1 grad)`.
pub fn step_generic(
    q: &GaussianDistribution,
    tag: ParamTag,
    grad: &DVector<f64>,
) -> Result<GaussianDistribution> {
    let delta = natural_increment(q, tag, grad)?;
    from_coordinates(&(coordinates(q, tag) + delta), tag, q.dim()).map_err(|e| match e {
        Error::NotPositiveDefinite(m) => Error::StepRejected(format!("{tag} step: {m}")),
        other => other,
    })
}

/// Something the hybrid optimizer can drive.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Dimension the expectation rule must handle; a factored objective only
    /// integrates over factor marginals.
    fn rule_dim(&self) -> usize {
        self.dim()
    }

    /// `V(q)` and its derivatives at `q`.
    fn evaluate(&self, q: &MeanPrecision, rule: &ExpectationRule) -> Result<(f64, DerivativeBundle)>;

    /// Called on every iterate before it is recorded.
    fn check_iterate(&self, _q: &MeanPrecision) -> Result<()> {
        Ok(())
    }
}

impl Objective for LossFunctional {
    fn dim(&self) -> usize {
        LossFunctional::dim(self)
    }

    fn evaluate(&self, q: &MeanPrecision, rule: &ExpectationRule) -> Result<(f64, DerivativeBundle)> {
        vloss::evaluate(self, &q.clone().into(), rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub mean: Vec<f64>,
    /// SHA-256 of `vech(Sigma^-1)` as little-endian bytes.
    pub prec_fingerprint: String,
    pub accepted: bool,
    pub converged: bool,
    /// `-1/2 grad^T I^-1 grad` for the step taken from this iterate.
    pub predicted_decrease: f64,
    /// `V_k - V_{k-1}`; zero on the first row.
    pub value_change: f64,
    pub decrease_violation: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn decrease_violations(&self) -> Vec<&IterationRecord> {
        self.records.iter().filter(|r| r.decrease_violation).collect()
    }

    /// Largest `V_k - V_{k-1}` over the trace (negative if V always fell).
    pub fn max_increase(&self) -> f64 {
        self.records.iter().skip(1).map(|r| r.value_change).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged { iter: usize },
    MaxIterations,
    Failed { iter: usize, error: Error },
}

#[derive(Debug, Clone)]
pub struct NgdOutcome {
    /// Last accepted iterate.
    pub estimate: MeanPrecision,
    pub trace: IterationTrace,
    pub termination: Termination,
}

impl NgdOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Converged { .. })
    }
}

pub fn fingerprint(prec: &SymmetricMatrix) -> String {
    let mut hasher = Sha256::new();
    for x in prec.half() {
        hasher.update(x.to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `-1/2 [g^T Sigma g + 2 tr(G P G P)]` with `G = dV/dSigma^-1`, `P = Sigma^-1`.
pub fn predicted_decrease(cov: &DMatrix<f64>, prec: &DMatrix<f64>, d: &DerivativeBundle) -> f64 {
    let g = &d.grad_mu;
    let gp = d.grad_prec.to_dense();
    let gpgp = &gp * prec * &gp * prec;
    -0.5 * (g.dot(&(cov * g)) + 2.0 * gpgp.trace())
}

/// Hybrid iteration from `q0` on a plain loss.
pub fn optimize(loss: &LossFunctional, q0: &GaussianDistribution, cfg: &NgdConfig) -> Result<NgdOutcome> {
    run(loss, &q0.to_mean_precision()?, cfg)
}

/// Drives any [`Objective`] with hybrid steps. Row 0 of the trace is `q0`.
/// An iterate converges when the step it would take has
/// `|dmu| / max(1, |mu|) < rel_tol` and `|H - Sigma^-1|_F / |Sigma^-1|_F < rel_tol`;
/// the converged iterate itself is returned.
pub fn run<O: Objective + ?Sized>(
    objective: &O,
    q0: &MeanPrecision,
    cfg: &NgdConfig,
) -> Result<NgdOutcome> {
    let n = objective.dim();
    if q0.dim() != n {
        return Err(Error::Dimension(format!(
            "objective has dimension {n} but the initial q has dimension {}",
            q0.dim()
        )));
    }
    cfg.validate(objective.rule_dim())?;

    let mut trace = IterationTrace::default();
    let mut q = q0.clone();
    let mut previous: Option<f64> = None;
    let fail = |q: MeanPrecision, trace, iter, error| {
        Ok(NgdOutcome { estimate: q, trace, termination: Termination::Failed { iter, error } })
    };

    for k in 0..=cfg.max_iters {
        if let Err(e) = objective.check_iterate(&q) {
            return fail(q, trace, k, e);
        }
        let (value, bundle) = match objective.evaluate(&q, &cfg.rule) {
            Ok(r) => r,
            Err(e) => return fail(q, trace, k, e),
        };
        let prec = q.prec().to_dense();
        let cov = q.chol().inverse();
        let value_change = previous.map_or(0.0, |p| value - p);
        let mut record = IterationRecord {
            iter: k,
            value,
            grad_norm: bundle.grad_mu.norm(),
            mean: q.mean().as_slice().to_vec(),
            prec_fingerprint: fingerprint(q.prec()),
            accepted: true,
            converged: false,
            predicted_decrease: predicted_decrease(&cov, &prec, &bundle),
            value_change,
            decrease_violation: previous.is_some() && value_change > DECREASE_TOL,
        };
        let next = match step_hybrid_scaled(&q, &bundle, cfg.step_scale, cfg.jitter) {
            Ok(next) => next,
            Err(e) => {
                trace.records.push(record);
                return fail(q, trace, k, e);
            }
        };
        let dmu = (next.mean() - q.mean()).norm() / cfg.step_scale;
        let mean_rel = dmu / q.mean().norm().max(1.0);
        let prec_rel = (next.prec().to_dense() - &prec).norm() / prec.norm();
        record.converged = mean_rel < cfg.rel_tol && prec_rel < cfg.rel_tol;
        let converged = record.converged;
        trace.records.push(record);
        if converged {
            return Ok(NgdOutcome { estimate: q, trace, termination: Termination::Converged { iter: k } });
        }
        if k == cfg.max_iters {
            break;
        }
        previous = Some(value);
        q = next;
    }
    Ok(NgdOutcome { estimate: q, trace, termination: Termination::MaxIterations })
}
