//! Natural-gradient steps agree across parameterizations: covariance
//! coordinates reproduce the canonical step, precision coordinates the hybrid one.

use gaussian_ngd::ngd::{step_canonical, step_generic, step_hybrid, tagged_gradient};
use gaussian_ngd::vloss::derivatives;
use gaussian_ngd::{ExpectationRule, GaussianDistribution, LossFunctional, MeanCovariance, ParamTag};
use nalgebra::{DMatrix, DVector};

fn main() -> gaussian_ngd::Result<()> {
    let loss = LossFunctional::new(2, |x| (x[0] - 1.0).powi(2) + 0.5 * (x[0] + x[1]).powi(2) + 0.05 * x[1].powi(4));
    let q: GaussianDistribution =
        MeanCovariance::from_dense(DVector::from_vec(vec![0.5, 0.0]), &DMatrix::from_row_slice(2, 2, &[0.4, -0.15, -0.15, 0.5]))?
            .into();
    let d = derivatives(&loss, &q, &ExpectationRule::gauss_hermite(6)?)?;

    let canonical = step_canonical(&q.to_mean_covariance()?, &d)?;
    let hybrid = step_hybrid(&q.to_mean_precision()?, &d)?;
    for tag in ParamTag::ALL {
        let next = step_generic(&q, tag, &tagged_gradient(&q, tag, &d)?)?;
        let gap = match tag {
            ParamTag::Theta | ParamTag::Gamma => (next.covariance().to_dense() - canonical.cov().to_dense()).amax(),
            _ => (next.precision().to_dense() - hybrid.prec().to_dense()).amax(),
        };
        let reference = if matches!(tag, ParamTag::Theta | ParamTag::Gamma) { "canonical Sigma" } else { "hybrid Sigma^-1" };
        println!("{tag:>5}: max gap to {reference} = {gap:.1e}");
    }
    Ok(())
}
