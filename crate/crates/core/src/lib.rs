//! Natural gradient descent for multivariate Gaussian variational inference.
//!
//! The crate is organised bottom-up:
//!
//! - [`kronmat`]: `vec`/`mat`, Kronecker products, `vech`/`matf`, duplication
//!   matrices and the `sym` operator.
//! - [`gaussian`]: the three Gaussian forms (mean/covariance, mean/precision,
//!   natural), conversions, log-density, sampling and closed-form KL.
//! - [`fim`]: Fisher information matrices and their closed-form inverses for
//!   the theta, gamma, alpha, beta and eta parameterizations, plus a
//!   finite-difference KL Hessian used as an oracle.
//! - [`quadrature`]: Gauss-Hermite and Monte Carlo expectation rules.
//! - [`vloss`]: the variational loss `V(q)` and its derivatives.
//! - [`ngd`]: natural-gradient steps and the hybrid fixed-point optimizer.
//! - [`factors`]: factored losses with sparsity-preserving precision updates.
//! - [`problem`]: problem files, the `run` driver and its output files.
//! - [`verify`]: self-check suites behind the `verify` command.

pub mod error;
pub mod factors;
mod fd;
pub mod fim;
pub mod gaussian;
pub mod kronmat;
pub mod ngd;
pub mod problem;
pub mod quadrature;
pub mod verify;
pub mod vloss;

pub use error::{Error, Result};
pub use factors::{Factor, FactorGraph, SparsePattern};
pub use fim::{FisherInfo, ParamTag};
pub use gaussian::{FormTag, GaussianDistribution, MeanCovariance, MeanPrecision, NaturalForm};
pub use kronmat::{DenseMatrix, DuplicationPair, SymmetricMatrix};
pub use ngd::{IterationTrace, NgdConfig, NgdOutcome, Termination};
pub use quadrature::ExpectationRule;
pub use vloss::{DerivativeBundle, LossFunctional};
