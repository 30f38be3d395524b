//! Central finite differences shared by the oracles.

use nalgebra::DVector;

use crate::error::Result;
use crate::kronmat::DenseMatrix;

pub(crate) fn central_gradient<F>(x0: &DVector<f64>, h: f64, f: &F) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let mut grad = DVector::zeros(x0.len());
    for i in 0..x0.len() {
        let mut xp = x0.clone();
        xp[i] += h;
        let mut xm = x0.clone();
        xm[i] -= h;
        grad[i] = (f(&xp)? - f(&xm)?) / (2.0 * h);
    }
    Ok(grad)
}

pub(crate) fn central_hessian<F>(x0: &DVector<f64>, h: f64, f: &F) -> Result<DenseMatrix>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let k = x0.len();
    let at = |steps: &[(usize, f64)]| -> Result<f64> {
        let mut x = x0.clone();
        for &(i, s) in steps {
            x[i] += s;
        }
        f(&x)
    };
    let f0 = f(x0)?;
    let mut hess = DenseMatrix::zeros(k, k);
    for i in 0..k {
        let fp = at(&[(i, h)])?;
        let fm = at(&[(i, -h)])?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = at(&[(i, h), (j, h)])?;
            let fpm = at(&[(i, h), (j, -h)])?;
            let fmp = at(&[(i, -h), (j, h)])?;
            let fmm = at(&[(i, -h), (j, -h)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}
