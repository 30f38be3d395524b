//! Fisher information in the five parameterizations, checked against a
//! finite-difference Hessian of the KL divergence.

use gaussian_ngd::fim::{fd_kl_hessian, fim, fim_inverse, projected_fim, KlArgument, FD_DEFAULT_STEP};
use gaussian_ngd::{GaussianDistribution, MeanCovariance, ParamTag};
use nalgebra::{DMatrix, DVector};

fn main() -> gaussian_ngd::Result<()> {
    let q: GaussianDistribution = MeanCovariance::from_dense(
        DVector::from_vec(vec![0.5, -0.2]),
        &DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]),
    )?
    .into();
    for tag in ParamTag::ALL {
        let i = fim(&q, tag)?;
        let inv = fim_inverse(&q, tag)?;
        let k = i.matrix.nrows();
        let id_err = (&inv.matrix * &i.matrix - DMatrix::identity(k, k)).amax();
        let fd = fd_kl_hessian(&q, tag, FD_DEFAULT_STEP, KlArgument::Second)?;
        let proj = projected_fim(&q, tag)?;
        println!(
            "{tag:>5}: {k:>2} coordinates, |I^-1 I - 1| = {id_err:.1e}, FD relative error = {:.1e}",
            (fd - &proj).amax() / proj.amax()
        );
    }
    println!("gamma FIM:{}", fim(&q, ParamTag::Gamma)?.matrix);
    Ok(())
}
