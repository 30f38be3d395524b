//! Hybrid fixed-point iteration on a non-Gaussian posterior.

use gaussian_ngd::ngd::optimize;
use gaussian_ngd::{ExpectationRule, GaussianDistribution, LossFunctional, MeanCovariance, NgdConfig};
use nalgebra::DVector;

fn main() -> gaussian_ngd::Result<()> {
    // Gaussian prior, a logistic observation and a quartic penalty.
    let loss = LossFunctional::new(2, |x| {
        let s = x[0] + 2.0 * x[1] - 1.0;
        0.5 * (x[0] * x[0] + x[1] * x[1]) + (1.0 + (-3.0 * s).exp()).ln() + 0.1 * x[0].powi(4)
    });
    let q0: GaussianDistribution = MeanCovariance::new(DVector::from_vec(vec![1.0, 0.8]), gaussian_ngd::SymmetricMatrix::identity(2))?.into();
    let cfg = NgdConfig { max_iters: 100, rel_tol: 1e-10, ..NgdConfig::with_rule(ExpectationRule::gauss_hermite(10)?) };
    let out = optimize(&loss, &q0, &cfg)?;
    for r in &out.trace.records {
        println!(
            "iter {:>2}  V = {:.10}  |grad| = {:.2e}  predicted {:+.2e}  mu = {:.6?}",
            r.iter, r.value, r.grad_norm, r.predicted_decrease, r.mean
        );
    }
    println!("{:?}\nprecision = {}", out.termination, out.estimate.prec().to_dense());
    Ok(())
}
