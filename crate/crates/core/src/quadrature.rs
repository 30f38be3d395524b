//! Expectations under a Gaussian: `E_q[f]`, `E_q[(x - mu) f]` and
//! `E_q[(x - mu)(x - mu)^T f]`.
//!
//! Gauss-Hermite rules use a tensor grid of standard-normal nodes mapped
//! through the whitening transform `x = mu + L xi`, with `L L^T = Sigma`.
//! Weights are normalized so that `E[1] = 1` exactly. Monte Carlo rules draw
//! from [`GaussianDistribution::sample`] with an explicit seed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gaussian::GaussianDistribution;
use crate::kronmat::SymmetricMatrix;

pub const MAX_HERMITE_ORDER: usize = 20;
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;
pub const DEFAULT_HERMITE_ORDER: usize = 5;
pub const DEFAULT_MONTE_CARLO_SAMPLES: usize = 10_000;
/// Largest dimension for which the default rule is a tensor Gauss-Hermite grid.
pub const DEFAULT_HERMITE_MAX_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    GaussHermite,
    MonteCarlo,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::GaussHermite => "gauss_hermite",
            RuleKind::MonteCarlo => "monte_carlo",
        }
    }
}

/// How `E_q[.]` is evaluated. `order` is points per dimension for
/// Gauss-Hermite and the total sample count for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpectationRule {
    pub kind: RuleKind,
    pub order: usize,
    pub seed: u64,
    pub budget: usize,
}

impl ExpectationRule {
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        let rule = Self { kind: RuleKind::GaussHermite, order, seed: 0, budget: DEFAULT_NODE_BUDGET };
        rule.check_order()?;
        Ok(rule)
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Result<Self> {
        let rule = Self { kind: RuleKind::MonteCarlo, order: samples, seed, budget: DEFAULT_NODE_BUDGET };
        rule.check_order()?;
        Ok(rule)
    }

    /// Gauss-Hermite of order 5 up to dimension 6, Monte Carlo with 10^4
    /// samples beyond.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim <= DEFAULT_HERMITE_MAX_DIM {
            Self::gauss_hermite(DEFAULT_HERMITE_ORDER).expect("valid default")
        } else {
            Self::monte_carlo(DEFAULT_MONTE_CARLO_SAMPLES, 0).expect("valid default")
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    fn check_order(&self) -> Result<()> {
        match self.kind {
            RuleKind::GaussHermite if !(1..=MAX_HERMITE_ORDER).contains(&self.order) => {
                Err(Error::Config(format!(
                    "Gauss-Hermite order must be in [1, {MAX_HERMITE_ORDER}], got {}",
                    self.order
                )))
            }
            RuleKind::MonteCarlo if self.order == 0 => {
                Err(Error::Config("Monte Carlo sample count must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Checks the rule against a dimension, including the tensor-grid budget.
    pub fn validate(&self, dim: usize) -> Result<()> {
        self.check_order()?;
        let count = self.point_count(dim)?;
        if count > self.budget {
            return Err(Error::Config(format!(
                "{} evaluation points for dimension {dim} exceed the budget of {}",
                count, self.budget
            )));
        }
        Ok(())
    }

    pub fn point_count(&self, dim: usize) -> Result<usize> {
        match self.kind {
            RuleKind::GaussHermite => u32::try_from(dim)
                .ok()
                .and_then(|d| self.order.checked_pow(d))
                .ok_or_else(|| Error::Config(format!("tensor grid for dimension {dim} overflows"))),
            RuleKind::MonteCarlo => Ok(self.order),
        }
    }
}

/// Standard-normal Gauss-Hermite nodes and weights (weights sum to 1).
///
/// Nodes start from the Golub-Welsch eigenvalues of the Hermite Jacobi
/// matrix and are polished with Newton steps on the orthonormal recurrence.
pub fn hermite_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=MAX_HERMITE_ORDER).contains(&order) {
        return Err(Error::Config(format!(
            "Gauss-Hermite order must be in [1, {MAX_HERMITE_ORDER}], got {order}"
        )));
    }
    let n = order;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut roots: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    let pi_quarter = std::f64::consts::PI.powf(-0.25);
    // orthonormal physicists' Hermite value at z and derivative of degree n
    let eval = |z: f64| -> (f64, f64) {
        let mut p1 = pi_quarter;
        let mut p2 = 0.0;
        for j in 1..=n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        }
        (p1, (2.0 * n as f64).sqrt() * p2)
    };

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for r in roots {
        let mut z = r;
        for _ in 0..10 {
            let (p, dp) = eval(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = eval(z);
        nodes.push(std::f64::consts::SQRT_2 * z);
        weights.push(2.0 / (dp * dp));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

/// Visits every evaluation point as `(weight, x, x - mu)` in a fixed order.
fn sweep<F>(rule: &ExpectationRule, g: &GaussianDistribution, mut visit: F) -> Result<()>
where
    F: FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<()>,
{
    let n = g.dim();
    rule.validate(n)?;
    let mean = g.mean();
    match rule.kind {
        RuleKind::GaussHermite => {
            let (xi, w) = hermite_rule(rule.order)?;
            let l = g.cov_sqrt();
            let m = rule.order;
            let mut idx = vec![0usize; n];
            let mut z = DVector::zeros(n);
            loop {
                let mut weight = 1.0;
                for (k, &i) in idx.iter().enumerate() {
                    z[k] = xi[i];
                    weight *= w[i];
                }
                let dx = &l * &z;
                let x = &mean + &dx;
                visit(weight, &x, &dx)?;
                // odometer increment over the tensor grid
                let mut k = 0;
                while k < n {
                    idx[k] += 1;
                    if idx[k] < m {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == n {
                    break;
                }
            }
        }
        RuleKind::MonteCarlo => {
            let xs = g.sample(rule.order, rule.seed)?;
            let weight = 1.0 / xs.len() as f64;
            for x in &xs {
                let dx = x - &mean;
                visit(weight, x, &dx)?;
            }
        }
    }
    Ok(())
}

fn evaluate<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>) -> Result<f64> {
    let value = f(x.as_slice());
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation { node: x.as_slice().to_vec(), value })
    }
}

/// `E_q[f(x)]`.
pub fn expect_scalar<F>(rule: &ExpectationRule, g: &GaussianDistribution, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut s = 0.0;
    sweep(rule, g, |w, x, _| {
        s += w * evaluate(&f, x)?;
        Ok(())
    })?;
    Ok(s)
}

/// The triple `(E[f], E[(x - mu) f], E[(x - mu)(x - mu)^T f])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMoments {
    pub scalar: f64,
    pub first: DVector<f64>,
    pub second: SymmetricMatrix,
}

/// All three weighted moments from one sweep of the evaluation points.
pub fn expect_weighted<F>(
    rule: &ExpectationRule,
    g: &GaussianDistribution,
    f: F,
) -> Result<WeightedMoments>
where
    F: Fn(&[f64]) -> f64,
{
    let n = g.dim();
    let mut s = 0.0;
    let mut v = DVector::zeros(n);
    let mut m = DMatrix::zeros(n, n);
    sweep(rule, g, |w, x, dx| {
        let fx = evaluate(&f, x)?;
        let wf = w * fx;
        s += wf;
        v.axpy(wf, dx, 1.0);
        m.ger(wf, dx, dx, 1.0);
        Ok(())
    })?;
    Ok(WeightedMoments {
        scalar: s,
        first: v,
        second: SymmetricMatrix::symmetrize(&m).expect("square"),
    })
}
