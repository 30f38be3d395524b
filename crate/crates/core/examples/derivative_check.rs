//! Analytic derivatives of V against finite differences.

use gaussian_ngd::vloss::{derivatives, fd_check, relation_residual, value};
use gaussian_ngd::{ExpectationRule, GaussianDistribution, LossFunctional, MeanPrecision};
use nalgebra::{DMatrix, DVector};

fn main() -> gaussian_ngd::Result<()> {
    let loss = LossFunctional::new(2, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) + (x[0] - x[1]).sin() + 0.1 * x[0].powi(4));
    let q: GaussianDistribution = MeanPrecision::from_dense(
        DVector::from_vec(vec![0.2, 0.7]),
        &DMatrix::from_row_slice(2, 2, &[2.0, -0.3, -0.3, 1.5]),
    )?
    .into();
    let rule = ExpectationRule::gauss_hermite(12)?;
    println!("V = {:.10}", value(&loss, &q, &rule)?);
    let d = derivatives(&loss, &q, &rule)?;
    println!("dV/dmu = {:.6}d2V/dmu2 = {:.6}dV/dSigma^-1 = {:.6}", d.grad_mu.transpose(), d.hess_mu.to_dense(), d.grad_prec.to_dense());
    println!("relation residual = {:.1e}", relation_residual(&d, &q.covariance().to_dense()));
    let report = fd_check(&loss, &q, &rule, 1e-4)?;
    println!(
        "finite differences: grad_mu {:.1e}, hess_mu {:.1e}, grad_prec {:.1e}",
        report.grad_mu.rel_error, report.hess_mu.rel_error, report.grad_prec.rel_error
    );
    Ok(())
}
