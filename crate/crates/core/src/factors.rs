//! Factored losses `phi(x) = sum_k phi_k(P_k x)`.
//!
//! Each factor sees only its marginal `q_k`, and contributes
//! `P_k^T dV_k/dmu_k^T` and `P_k^T H_k P_k` to the assembled derivatives, so
//! the new precision can only be nonzero where some factor couples two
//! variables.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{MeanCovariance, MeanPrecision};
use crate::kronmat::SymmetricMatrix;
use crate::ngd::{self, NgdConfig, NgdOutcome, Objective};
use crate::quadrature::{expect_weighted, ExpectationRule};
use crate::vloss::{bundle_from_moments, grad_prec_from_hessian, DerivativeBundle, LossFunctional, Phi};

#[derive(Clone)]
pub struct Factor {
    id: String,
    indices: Vec<usize>,
    local_phi: Phi,
}

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Factor").field("id", &self.id).field("indices", &self.indices).finish_non_exhaustive()
    }
}

impl Factor {
    pub fn new<F>(id: impl Into<String>, indices: Vec<usize>, local_phi: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_phi(id, indices, std::sync::Arc::new(local_phi))
    }

    pub fn from_phi(id: impl Into<String>, indices: Vec<usize>, local_phi: Phi) -> Result<Self> {
        let id = id.into();
        if indices.is_empty() {
            return Err(Error::Contract(format!("factor '{id}' has no variables")));
        }
        let distinct: BTreeSet<_> = indices.iter().collect();
        if distinct.len() != indices.len() {
            return Err(Error::Contract(format!("factor '{id}' repeats a variable index")));
        }
        Ok(Self { id, indices, local_phi })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn local_phi(&self) -> &Phi {
        &self.local_phi
    }
}

#[derive(Debug, Clone)]
pub struct FactorGraph {
    dim: usize,
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new(dim: usize, factors: Vec<Factor>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("factor graph needs at least one variable".into()));
        }
        let mut g = Self { dim, factors: Vec::with_capacity(factors.len()) };
        for f in factors {
            g.push(f)?;
        }
        Ok(g)
    }

    pub fn push(&mut self, factor: Factor) -> Result<()> {
        if let Some(&i) = factor.indices.iter().find(|&&i| i >= self.dim) {
            return Err(Error::Contract(format!(
                "factor '{}': variable index {i} is out of range for dimension {}",
                factor.id, self.dim
            )));
        }
        self.factors.push(factor);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn pattern(&self) -> SparsePattern {
        let mut entries: BTreeSet<(usize, usize)> = (0..self.dim).map(|i| (i, i)).collect();
        for f in &self.factors {
            for &a in &f.indices {
                for &b in &f.indices {
                    if a >= b {
                        entries.insert((a, b));
                    }
                }
            }
        }
        SparsePattern { dim: self.dim, entries }
    }

    /// Largest number of variables in one factor.
    pub fn max_arity(&self) -> usize {
        self.factors.iter().map(|f| f.indices.len()).max().unwrap_or(0)
    }

    /// Variables no factor touches.
    pub fn uncovered(&self) -> Vec<usize> {
        let mut seen = vec![false; self.dim];
        for f in &self.factors {
            for &i in &f.indices {
                seen[i] = true;
            }
        }
        (0..self.dim).filter(|&i| !seen[i]).collect()
    }

    /// The unfactored loss with `phi = sum_k phi_k`.
    pub fn to_loss(&self) -> LossFunctional {
        let factors = self.factors.clone();
        LossFunctional::new(self.dim, move |x| {
            let mut local = Vec::new();
            factors
                .iter()
                .map(|f| {
                    local.clear();
                    local.extend(f.indices.iter().map(|&i| x[i]));
                    (f.local_phi)(&local)
                })
                .sum()
        })
    }
}

/// Lower-triangle `(row, col)` entries allowed to be nonzero, diagonal included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePattern {
    dim: usize,
    entries: BTreeSet<(usize, usize)>,
}

impl SparsePattern {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.contains(&(i.max(j), i.min(j)))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }

    /// Fails on the first stored nonzero outside the pattern.
    pub fn check(&self, m: &SymmetricMatrix) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "pattern has dimension {} but matrix has dimension {}",
                self.dim,
                m.dim()
            )));
        }
        for j in 0..self.dim {
            for i in j..self.dim {
                let value = m.get(i, j);
                if value != 0.0 && !self.entries.contains(&(i, j)) {
                    return Err(Error::PatternViolation { row: i, col: j, value });
                }
            }
        }
        Ok(())
    }
}

/// `(P_k mu, P_k Sigma P_k^T)` from the needed columns of `Sigma`.
pub fn extract_marginal(q: &MeanPrecision, indices: &[usize]) -> Result<MeanCovariance> {
    let n = q.dim();
    if indices.is_empty() {
        return Err(Error::Contract("marginal over no variables".into()));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::Dimension(format!("index {i} out of range for dimension {n}")));
    }
    let k = indices.len();
    let mut e = DMatrix::zeros(n, k);
    for (c, &i) in indices.iter().enumerate() {
        e[(i, c)] = 1.0;
    }
    let cols = q.chol().solve(&e);
    let cov = DMatrix::from_fn(k, k, |r, c| cols[(indices[r], c)]);
    let mean = DVector::from_iterator(k, indices.iter().map(|&i| q.mean()[i]));
    MeanCovariance::new(mean, SymmetricMatrix::symmetrize(&cov)?)
}

/// Loss value and scatter-added derivatives. The precision gradient is
/// recovered from the assembled Hessian.
pub fn assemble_with_value(
    g: &FactorGraph,
    q: &MeanPrecision,
    rule: &ExpectationRule,
) -> Result<(f64, DerivativeBundle)> {
    let n = g.dim;
    if q.dim() != n {
        return Err(Error::Dimension(format!("graph has dimension {n} but q has dimension {}", q.dim())));
    }
    let uncovered = g.uncovered();
    if !uncovered.is_empty() {
        return Err(Error::Contract(format!("variables {uncovered:?} are not touched by any factor")));
    }
    let mut value = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for f in &g.factors {
        let marginal = extract_marginal(q, &f.indices)?;
        let qk = marginal.clone().into();
        let moments = expect_weighted(rule, &qk, |x| (f.local_phi)(x))?;
        let cov_k = marginal.cov().to_dense();
        let prec_k = marginal.chol().inverse();
        let local = bundle_from_moments(&cov_k, &prec_k, &moments);
        let hk = local.hess_mu.to_dense();
        value += moments.scalar;
        for (a, &i) in f.indices.iter().enumerate() {
            grad[i] += local.grad_mu[a];
            for (b, &j) in f.indices.iter().enumerate() {
                hess[(i, j)] += hk[(a, b)];
            }
        }
    }
    let cov = q.chol().inverse();
    let log_det_prec = 2.0 * q.chol().l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    value += 0.5 * log_det_prec;
    let hess_mu = SymmetricMatrix::symmetrize(&hess)?;
    let grad_prec = grad_prec_from_hessian(&cov, &hess_mu);
    Ok((value, DerivativeBundle { grad_mu: grad, hess_mu, grad_prec }))
}

pub fn assemble(g: &FactorGraph, q: &MeanPrecision, rule: &ExpectationRule) -> Result<DerivativeBundle> {
    assemble_with_value(g, q, rule).map(|(_, b)| b)
}

struct Factored<'a> {
    graph: &'a FactorGraph,
    pattern: SparsePattern,
}

impl Objective for Factored<'_> {
    fn dim(&self) -> usize {
        self.graph.dim
    }

    fn rule_dim(&self) -> usize {
        self.graph.max_arity()
    }

    fn evaluate(&self, q: &MeanPrecision, rule: &ExpectationRule) -> Result<(f64, DerivativeBundle)> {
        assemble_with_value(self.graph, q, rule)
    }

    fn check_iterate(&self, q: &MeanPrecision) -> Result<()> {
        self.pattern.check(q.prec())
    }
}

/// Hybrid iteration on a factor graph, checking every iterate against the
/// graph's sparsity pattern.
pub fn optimize_factored(g: &FactorGraph, q0: &MeanPrecision, cfg: &NgdConfig) -> Result<NgdOutcome> {
    ngd::run(&Factored { graph: g, pattern: g.pattern() }, q0, cfg)
}

/// Step-at-a-time driver whose pattern is fixed when it is created.
#[derive(Debug, Clone)]
pub struct FactoredSolver {
    graph: FactorGraph,
    pattern: SparsePattern,
    q: MeanPrecision,
    cfg: NgdConfig,
    iter: usize,
}

impl FactoredSolver {
    pub fn new(graph: FactorGraph, q0: MeanPrecision, cfg: NgdConfig) -> Result<Self> {
        cfg.validate(graph.max_arity().max(1))?;
        let pattern = graph.pattern();
        pattern.check(q0.prec())?;
        Ok(Self { graph, pattern, q: q0, cfg, iter: 0 })
    }

    pub fn graph_mut(&mut self) -> &mut FactorGraph {
        &mut self.graph
    }

    pub fn pattern(&self) -> &SparsePattern {
        &self.pattern
    }

    pub fn estimate(&self) -> &MeanPrecision {
        &self.q
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    /// One hybrid step; the new precision must respect the original pattern.
    pub fn step(&mut self) -> Result<&MeanPrecision> {
        let bundle = assemble(&self.graph, &self.q, &self.cfg.rule)?;
        let next = ngd::step_hybrid_scaled(&self.q, &bundle, self.cfg.step_scale, self.cfg.jitter)?;
        self.pattern.check(next.prec())?;
        self.q = next;
        self.iter += 1;
        Ok(&self.q)
    }
}
