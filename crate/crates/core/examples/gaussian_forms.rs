//! The three Gaussian forms, conversions, sampling and closed-form KL.

use gaussian_ngd::gaussian::kl;
use gaussian_ngd::{FormTag, GaussianDistribution, MeanCovariance};
use nalgebra::{DMatrix, DVector};

fn main() -> gaussian_ngd::Result<()> {
    let q: GaussianDistribution = MeanCovariance::from_dense(
        DVector::from_vec(vec![1.0, -1.0]),
        &DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]),
    )?
    .into();
    let mp = q.to_mean_precision()?;
    println!("precision ={:.6}", mp.prec().to_dense());
    if let GaussianDistribution::Natural(n) = q.convert(FormTag::Natural)? {
        println!("natural eta1 = {:.6}", n.eta1().transpose());
    }
    println!("log|Sigma| = {:.6}", q.log_det_cov());
    println!("log N(0; q) = {:.6}", q.log_pdf(&DVector::zeros(2))?);

    let samples = q.sample(20_000, 7)?;
    let mean = samples.iter().fold(DVector::zeros(2), |acc, x| acc + x) / samples.len() as f64;
    println!("sample mean = {:.4}", mean.transpose());

    let p = MeanCovariance::from_dense(DVector::zeros(2), &DMatrix::identity(2, 2))?;
    println!("KL(q || N(0, I)) = {:.6}", kl(&q.to_mean_covariance()?, &p)?);
    Ok(())
}
