//! The variational loss `V(q) = E_q[phi(x)] + 1/2 ln|Sigma^-1|` (constants
//! dropped) and its derivatives with respect to `mu` and `Sigma^-1`.
//!
//! With `d = x - mu`, `s = E[phi]`, `v = E[d phi]`, `M = E[d d^T phi]`:
//!
//! ```text
//! dV/dmu^T        = Sigma^-1 v
//! d2V/dmu^T dmu   = Sigma^-1 M Sigma^-1 - s Sigma^-1
//! dV/dSigma^-1    = -M/2 + s Sigma/2 + Sigma/2
//! ```
//!
//! The last two satisfy `dV/dSigma^-1 = Sigma/2 - Sigma H Sigma / 2`, which
//! [`relation_residual`] measures.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd::{central_gradient, central_hessian};
use crate::gaussian::{GaussianDistribution, MeanPrecision};
use crate::kronmat::{duplication, half_len, SymmetricMatrix};
use crate::quadrature::{expect_scalar, expect_weighted, ExpectationRule, WeightedMoments};

/// `phi(x) = -ln p(x, z)` evaluated on a slice of variables.
pub type Phi = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LossFunctional {
    dim: usize,
    phi: Phi,
}

impl fmt::Debug for LossFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFunctional").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl LossFunctional {
    pub fn new<F>(dim: usize, phi: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, phi: Arc::new(phi) }
    }

    pub fn from_phi(dim: usize, phi: Phi) -> Self {
        Self { dim, phi }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phi(&self) -> &Phi {
        &self.phi
    }

    fn check(&self, q: &GaussianDistribution) -> Result<()> {
        if q.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "loss has dimension {} but q has dimension {}",
                self.dim,
                q.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    /// `dV/dmu^T`
    pub grad_mu: DVector<f64>,
    /// `d2V/dmu^T dmu`
    pub hess_mu: SymmetricMatrix,
    /// `dV/dSigma^-1`, the unconstrained derivative of a symmetric argument
    pub grad_prec: SymmetricMatrix,
}

/// `E_q[phi] + 1/2 ln|Sigma^-1|`.
pub fn value(loss: &LossFunctional, q: &GaussianDistribution, rule: &ExpectationRule) -> Result<f64> {
    loss.check(q)?;
    let e_phi = expect_scalar(rule, q, |x| (loss.phi)(x))?;
    Ok(e_phi - 0.5 * q.log_det_cov())
}

/// Builds the bundle from one set of weighted moments of `phi` under `q`.
pub fn bundle_from_moments(
    cov: &DMatrix<f64>,
    prec: &DMatrix<f64>,
    moments: &WeightedMoments,
) -> DerivativeBundle {
    let s = moments.scalar;
    let m = moments.second.to_dense();
    let grad_mu = prec * &moments.first;
    let hess = prec * &m * prec - prec * s;
    let grad_prec = (m * -0.5) + cov * (0.5 * s) + cov * 0.5;
    DerivativeBundle {
        grad_mu,
        hess_mu: SymmetricMatrix::symmetrize(&hess).expect("square"),
        grad_prec: SymmetricMatrix::symmetrize(&grad_prec).expect("square"),
    }
}

/// Loss value and derivatives from a single quadrature sweep.
pub fn evaluate(
    loss: &LossFunctional,
    q: &GaussianDistribution,
    rule: &ExpectationRule,
) -> Result<(f64, DerivativeBundle)> {
    loss.check(q)?;
    let moments = expect_weighted(rule, q, |x| (loss.phi)(x))?;
    let cov = q.covariance().to_dense();
    let prec = q.precision().to_dense();
    let value = moments.scalar - 0.5 * q.log_det_cov();
    Ok((value, bundle_from_moments(&cov, &prec, &moments)))
}

pub fn derivatives(
    loss: &LossFunctional,
    q: &GaussianDistribution,
    rule: &ExpectationRule,
) -> Result<DerivativeBundle> {
    evaluate(loss, q, rule).map(|(_, b)| b)
}

/// `dV/dSigma^-1` implied by the Hessian: `Sigma/2 - Sigma H Sigma / 2`.
pub fn grad_prec_from_hessian(cov: &DMatrix<f64>, hess_mu: &SymmetricMatrix) -> SymmetricMatrix {
    let g = cov * 0.5 - cov * hess_mu.to_dense() * cov * 0.5;
    SymmetricMatrix::symmetrize(&g).expect("square")
}

/// Max-abs residual of `dV/dSigma^-1 = Sigma/2 - Sigma H Sigma / 2`.
pub fn relation_residual(bundle: &DerivativeBundle, cov: &DMatrix<f64>) -> f64 {
    let implied = grad_prec_from_hessian(cov, &bundle.hess_mu);
    (bundle.grad_prec.to_dense() - implied.to_dense()).amax()
}

/// One analytic-vs-numeric comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FdComparison {
    pub analytic: DVector<f64>,
    pub numeric: DVector<f64>,
    /// `max|analytic - numeric| / max(1, max|analytic|, max|numeric|)`
    pub rel_error: f64,
}

impl FdComparison {
    fn new(analytic: DVector<f64>, numeric: DVector<f64>) -> Self {
        let scale = analytic.amax().max(numeric.amax()).max(1.0);
        let rel_error = (&analytic - &numeric).amax() / scale;
        Self { analytic, numeric, rel_error }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub grad_mu: FdComparison,
    /// Compared as `vech` of the Hessian.
    pub hess_mu: FdComparison,
    /// Compared in `vech(Sigma^-1)` coordinates, where an off-diagonal entry
    /// moves both `(i, j)` and `(j, i)` and so sees twice the matrix entry.
    pub grad_prec: FdComparison,
    pub step: f64,
}

impl FdReport {
    pub fn max_rel_error(&self) -> f64 {
        self.grad_mu.rel_error.max(self.hess_mu.rel_error).max(self.grad_prec.rel_error)
    }
}

const FD_MAX_SHRINKS: usize = 8;

/// Checks [`derivatives`] against central differences of [`value`]: over
/// `mu` for the gradient and Hessian, and over `vech(Sigma^-1)` for the
/// precision gradient.
pub fn fd_check(
    loss: &LossFunctional,
    q: &GaussianDistribution,
    rule: &ExpectationRule,
    step: f64,
) -> Result<FdReport> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    loss.check(q)?;
    let n = q.dim();
    let base = q.to_mean_precision()?;
    let bundle = derivatives(loss, q, rule)?;

    let at_mean = |mu: &DVector<f64>| -> Result<f64> {
        let moved: GaussianDistribution = MeanPrecision::new(mu.clone(), base.prec().clone())?.into();
        value(loss, &moved, rule)
    };
    let at_prec = |h: &DVector<f64>| -> Result<f64> {
        let prec = SymmetricMatrix::from_half(h.as_slice().to_vec(), n)?;
        let moved: GaussianDistribution = MeanPrecision::new(base.mean().clone(), prec)?.into();
        value(loss, &moved, rule)
    };

    let mut h = step;
    for _ in 0..=FD_MAX_SHRINKS {
        let attempt = (|| -> Result<FdReport> {
            let g = central_gradient(base.mean(), h, &at_mean)?;
            let hess = central_hessian(base.mean(), h, &at_mean)?;
            let gp = central_gradient(&base.prec().vech(), h, &at_prec)?;
            let d = duplication(n)?;
            Ok(FdReport {
                grad_mu: FdComparison::new(bundle.grad_mu.clone(), g),
                hess_mu: FdComparison::new(
                    bundle.hess_mu.vech(),
                    SymmetricMatrix::from_lower(&hess).vech(),
                ),
                grad_prec: FdComparison::new(d.reduce_gradient(&bundle.grad_prec.to_dense()), gp),
                step: h,
            })
        })();
        match attempt {
            Err(Error::NotPositiveDefinite(_)) => h *= 0.5,
            other => return other,
        }
    }
    Err(Error::Domain(format!(
        "precision perturbations left the positive definite cone down to step {h:e}"
    )))
}

/// Number of unique precision entries perturbed by [`fd_check`].
pub fn precision_coordinates(n: usize) -> usize {
    half_len(n)
}
