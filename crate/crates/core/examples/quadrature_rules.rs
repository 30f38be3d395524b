//! Gauss-Hermite and Monte Carlo expectations under a Gaussian.

use gaussian_ngd::quadrature::{expect_scalar, expect_weighted, hermite_rule};
use gaussian_ngd::{ExpectationRule, GaussianDistribution, MeanCovariance};
use nalgebra::{DMatrix, DVector};

fn main() -> gaussian_ngd::Result<()> {
    let (nodes, weights) = hermite_rule(5)?;
    println!("order-5 nodes {nodes:.6?}\n        weights {weights:.6?}");

    let q: GaussianDistribution = MeanCovariance::from_dense(
        DVector::from_vec(vec![0.3, -0.4]),
        &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]),
    )?
    .into();
    let f = |x: &[f64]| (x[0] + x[1]).cos();
    // E[cos(a^T x)] = cos(a^T mu) exp(-a^T Sigma a / 2)
    let exact = (-0.1f64).cos() * (-0.5f64 * 4.0).exp();
    for rule in [
        ExpectationRule::gauss_hermite(3)?,
        ExpectationRule::gauss_hermite(10)?,
        ExpectationRule::monte_carlo(10_000, 1)?,
    ] {
        let e = expect_scalar(&rule, &q, f)?;
        println!("{:>13} {:>5}: E[cos(x0 + x1)] = {e:.10} (error {:.1e})", rule.kind.name(), rule.order, e - exact);
    }
    let m = expect_weighted(&ExpectationRule::gauss_hermite(10)?, &q, f)?;
    println!("E[(x - mu) f] = {:.6}", m.first.transpose());
    Ok(())
}
