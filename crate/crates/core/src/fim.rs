//! Fisher information matrices of a Gaussian in five parameterizations.
//!
//! | tag   | coordinates                | layout |
//! |-------|----------------------------|--------|
//! | theta | `(mu, vec Sigma)`          | `N + N^2` |
//! | gamma | `(mu, vech Sigma)`         | `N + N(N+1)/2` |
//! | alpha | `(mu, vec Sigma^-1)`       | `N + N^2` |
//! | beta  | `(mu, vech Sigma^-1)`      | `N + N(N+1)/2` |
//! | eta   | `(Sigma^-1 mu, vec Sigma^-1)` | `N + N^2` |
//!
//! Inverses are built from their closed forms and never by inverting the
//! FIM numerically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd::central_hessian;
use crate::gaussian::{kl, GaussianDistribution, MeanCovariance, MeanPrecision, NaturalForm};
use crate::kronmat::{duplication, half_len, kron, mat, vec, DenseMatrix, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamTag {
    Theta,
    Gamma,
    Alpha,
    Beta,
    Eta,
}

impl ParamTag {
    pub const ALL: [ParamTag; 5] =
        [ParamTag::Theta, ParamTag::Gamma, ParamTag::Alpha, ParamTag::Beta, ParamTag::Eta];

    pub fn name(self) -> &'static str {
        match self {
            ParamTag::Theta => "theta",
            ParamTag::Gamma => "gamma",
            ParamTag::Alpha => "alpha",
            ParamTag::Beta => "beta",
            ParamTag::Eta => "eta",
        }
    }

    /// Whether the matrix block is stored by `vech` (symmetry-aware).
    pub fn is_symmetry_aware(self) -> bool {
        matches!(self, ParamTag::Gamma | ParamTag::Beta)
    }

    /// Length of the matrix block for dimension `n`.
    pub fn matrix_block_len(self, n: usize) -> usize {
        if self.is_symmetry_aware() {
            half_len(n)
        } else {
            n * n
        }
    }

    pub fn coordinate_len(self, n: usize) -> usize {
        n + self.matrix_block_len(n)
    }
}

impl std::fmt::Display for ParamTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ParamTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown parameterization `{s}`")))
    }
}

/// A FIM (or inverse FIM) tagged with its parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub tag: ParamTag,
    pub matrix: DenseMatrix,
    pub inverse: bool,
}

fn block_diag(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DenseMatrix::zeros(ar + br, ac + bc);
    out.view_mut((0, 0), (ar, ac)).copy_from(a);
    out.view_mut((ar, ac), (br, bc)).copy_from(b);
    out
}

fn blocks(tl: &DenseMatrix, tr: &DenseMatrix, bl: &DenseMatrix, br: &DenseMatrix) -> DenseMatrix {
    let (n, m) = (tl.nrows(), br.nrows());
    let mut out = DenseMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(tl);
    out.view_mut((0, n), (n, m)).copy_from(tr);
    out.view_mut((n, 0), (m, n)).copy_from(bl);
    out.view_mut((n, n), (m, m)).copy_from(br);
    out
}

fn symmetric_part(m: DenseMatrix) -> DenseMatrix {
    (&m + m.transpose()) * 0.5
}

/// `(mu^T (x) I)`, the `N x N^2` map `vec(X) -> X mu`.
fn mu_t_kron_eye(mu: &DVector<f64>) -> DenseMatrix {
    let n = mu.len();
    kron(&DMatrix::from_row_slice(1, n, mu.as_slice()), &DMatrix::identity(n, n))
}

struct Moments {
    mean: DVector<f64>,
    cov: DenseMatrix,
    prec: DenseMatrix,
}

fn moments(g: &GaussianDistribution) -> Moments {
    Moments {
        mean: g.mean(),
        cov: g.covariance().to_dense(),
        prec: g.precision().to_dense(),
    }
}

pub fn fim(g: &GaussianDistribution, tag: ParamTag) -> Result<FisherInfo> {
    let Moments { mean, cov, prec } = moments(g);
    let n = mean.len();
    let matrix = match tag {
        ParamTag::Theta => block_diag(&prec, &(kron(&prec, &prec) * 0.5)),
        ParamTag::Gamma => {
            let d = duplication(n)?.dup;
            block_diag(&prec, &(d.transpose() * kron(&prec, &prec) * &d * 0.5))
        }
        ParamTag::Alpha => block_diag(&prec, &(kron(&cov, &cov) * 0.5)),
        ParamTag::Beta => {
            let d = duplication(n)?.dup;
            block_diag(&prec, &(d.transpose() * kron(&cov, &cov) * &d * 0.5))
        }
        ParamTag::Eta => {
            let m = mu_t_kron_eye(&mean);
            let coupling = -(&cov * &m);
            let br = kron(&cov, &cov) * 0.5 + m.transpose() * &cov * &m;
            blocks(&cov, &coupling, &coupling.transpose(), &br)
        }
    };
    Ok(FisherInfo { tag, matrix: symmetric_part(matrix), inverse: false })
}

pub fn fim_inverse(g: &GaussianDistribution, tag: ParamTag) -> Result<FisherInfo> {
    let Moments { mean, cov, prec } = moments(g);
    let n = mean.len();
    let matrix = match tag {
        ParamTag::Theta => block_diag(&cov, &(kron(&cov, &cov) * 2.0)),
        ParamTag::Gamma => {
            let dp = duplication(n)?.pinv;
            block_diag(&cov, &(&dp * kron(&cov, &cov) * dp.transpose() * 2.0))
        }
        ParamTag::Alpha => block_diag(&cov, &(kron(&prec, &prec) * 2.0)),
        ParamTag::Beta => {
            let dp = duplication(n)?.pinv;
            block_diag(&cov, &(&dp * kron(&prec, &prec) * dp.transpose() * 2.0))
        }
        ParamTag::Eta => {
            let p_mu = &prec * &mean;
            let quad = mean.dot(&p_mu);
            let tl = &prec * (1.0 + 2.0 * quad);
            let tr = kron(&DMatrix::from_row_slice(1, n, p_mu.as_slice()), &prec) * 2.0;
            let bl = kron(&DMatrix::from_column_slice(n, 1, p_mu.as_slice()), &prec) * 2.0;
            let br = kron(&prec, &prec) * 2.0;
            blocks(&tl, &tr, &bl, &br)
        }
    };
    Ok(FisherInfo { tag, matrix: symmetric_part(matrix), inverse: true })
}

/// Jacobian `d alpha / d eta`, i.e. `[[Sigma, -Sigma (mu^T (x) I)], [0, I]]`.
pub fn alpha_from_eta_jacobian(g: &GaussianDistribution) -> DenseMatrix {
    let Moments { mean, cov, .. } = moments(g);
    let n = mean.len();
    let tr = -(&cov * mu_t_kron_eye(&mean));
    blocks(&cov, &tr, &DMatrix::zeros(n * n, n), &DMatrix::identity(n * n, n * n))
}

/// `blockdiag(I_N, D)`: maps symmetry-aware increments to symmetry-blind ones.
pub fn vech_to_vec_jacobian(n: usize) -> Result<DenseMatrix> {
    Ok(block_diag(&DMatrix::identity(n, n), &duplication(n)?.dup))
}

/// Orthogonal projector onto perturbations that keep the matrix block
/// symmetric: `blockdiag(I, D D+)` for vec layouts, identity for vech ones.
pub fn symmetric_projector(tag: ParamTag, n: usize) -> Result<DenseMatrix> {
    if tag.is_symmetry_aware() {
        let k = tag.coordinate_len(n);
        return Ok(DMatrix::identity(k, k));
    }
    let p = duplication(n)?;
    Ok(block_diag(&DMatrix::identity(n, n), &(&p.dup * &p.pinv)))
}

/// Coordinates of `g` in the tagged parameterization.
pub fn coordinates(g: &GaussianDistribution, tag: ParamTag) -> DVector<f64> {
    let Moments { mean, cov, prec } = moments(g);
    let (first, block) = match tag {
        ParamTag::Theta => (mean, vec(&cov)),
        ParamTag::Gamma => (mean, SymmetricMatrix::from_lower(&cov).vech()),
        ParamTag::Alpha => (mean, vec(&prec)),
        ParamTag::Beta => (mean, SymmetricMatrix::from_lower(&prec).vech()),
        ParamTag::Eta => (&prec * &mean, vec(&prec)),
    };
    let mut out = DVector::zeros(first.len() + block.len());
    out.rows_mut(0, first.len()).copy_from(&first);
    out.rows_mut(first.len(), block.len()).copy_from(&block);
    out
}

/// Gaussian at tagged coordinates. A vec-layout matrix block is symmetrized,
/// so a perturbation of entry `(i, j)` moves both `(i, j)` and `(j, i)` by
/// half the amount.
pub fn from_coordinates(coords: &DVector<f64>, tag: ParamTag, n: usize) -> Result<GaussianDistribution> {
    if coords.len() != tag.coordinate_len(n) {
        return Err(Error::Dimension(format!(
            "{} coordinates of length {} for dimension {n}",
            tag,
            coords.len()
        )));
    }
    let first = coords.rows(0, n).into_owned();
    let block = coords.rows(n, coords.len() - n).into_owned();
    let matrix = if tag.is_symmetry_aware() {
        SymmetricMatrix::from_half(block.as_slice().to_vec(), n)?
    } else {
        SymmetricMatrix::symmetrize(&mat(&block, n, n)?)?
    };
    Ok(match tag {
        ParamTag::Theta | ParamTag::Gamma => MeanCovariance::new(first, matrix)?.into(),
        ParamTag::Alpha | ParamTag::Beta => MeanPrecision::new(first, matrix)?.into(),
        ParamTag::Eta => NaturalForm::new(first, matrix)?.into(),
    })
}

/// Which argument of `KL(. || .)` is perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlArgument {
    First,
    Second,
}

pub const FD_DEFAULT_STEP: f64 = 1e-3;
const FD_MAX_SHRINKS: usize = 8;

/// Central-difference Hessian of `KL` in tagged coordinates at coincidence,
/// with one Richardson refinement at `step / 2`. If a perturbation leaves the
/// positive definite cone the step is halved, at most 8 times.
pub fn fd_kl_hessian(
    g: &GaussianDistribution,
    tag: ParamTag,
    step: f64,
    argument: KlArgument,
) -> Result<DenseMatrix> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    let n = g.dim();
    let anchor = g.to_mean_covariance()?;
    let x0 = coordinates(g, tag);
    let f = |x: &DVector<f64>| -> Result<f64> {
        let moved = from_coordinates(x, tag, n)?.to_mean_covariance()?;
        match argument {
            KlArgument::Second => kl(&anchor, &moved),
            KlArgument::First => kl(&moved, &anchor),
        }
    };
    let mut h = step;
    let mut last_err = None;
    for _ in 0..=FD_MAX_SHRINKS {
        let coarse = central_hessian(&x0, h, &f);
        let fine = coarse.and_then(|c| central_hessian(&x0, 0.5 * h, &f).map(|fi| (c, fi)));
        match fine {
            Ok((c, fi)) => return Ok((fi * 4.0 - c) / 3.0),
            Err(e @ Error::NotPositiveDefinite(_)) => {
                last_err = Some(e);
                h *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Domain(format!(
        "KL Hessian perturbations left the positive definite cone down to step {h:e}: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// The FIM restricted to perturbations the oracle can represent: `S I S`
/// with `S` from [`symmetric_projector`].
pub fn projected_fim(g: &GaussianDistribution, tag: ParamTag) -> Result<DenseMatrix> {
    let s = symmetric_projector(tag, g.dim())?;
    let i = fim(g, tag)?.matrix;
    Ok(&s * i * &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::MeanCovariance;
    use crate::kronmat::duplication;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(mu: f64, var: f64) -> GaussianDistribution {
        MeanCovariance::from_dense(DVector::from_element(1, mu), &DMatrix::from_element(1, 1, var))
            .unwrap()
            .into()
    }

    fn random_gaussian(n: usize, rng: &mut impl Rng) -> GaussianDistribution {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let mu = DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
        MeanCovariance::from_dense(mu, &cov).unwrap().into()
    }

    fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        (a - b).amax() / b.amax()
    }

    #[test]
    fn theta_scalar_example() {
        let f = fim(&scalar(0.0, 2.0), ParamTag::Theta).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.125]);
        assert!(rel(&f.matrix, &expected) < 1e-15);
        let fi = fim_inverse(&scalar(0.0, 2.0), ParamTag::Theta).unwrap();
        assert_eq!(fi.matrix, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]));
        assert!(fi.inverse && !f.inverse);
        let numeric = f.matrix.try_inverse().unwrap();
        assert!(rel(&numeric, &fi.matrix) < 1e-15);
    }

    #[test]
    fn gamma_identity_example() {
        let g: GaussianDistribution =
            MeanCovariance::new(DVector::zeros(2), SymmetricMatrix::identity(2)).unwrap().into();
        let f = fim(&g, ParamTag::Gamma).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.5, 1.0, 0.5]));
        assert_eq!(f.matrix, expected);
    }

    #[test]
    fn eta_at_zero_mean_decouples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_gaussian(2, &mut rng);
        let g: GaussianDistribution =
            MeanCovariance::new(DVector::zeros(2), g.covariance()).unwrap().into();
        let f = fim(&g, ParamTag::Eta).unwrap().matrix;
        assert_eq!(f.view((0, 2), (2, 4)).amax(), 0.0);
        assert_eq!(f.view((0, 0), (2, 2)).into_owned(), g.covariance().to_dense());
    }

    #[test]
    fn eta_inverse_scalar_example() {
        let fi = fim_inverse(&scalar(1.0, 1.0), ParamTag::Eta).unwrap().matrix;
        assert_eq!(fi[(0, 0)], 3.0);
        assert_eq!(fi[(1, 1)], 2.0);
        let numeric = fim(&scalar(1.0, 1.0), ParamTag::Eta).unwrap().matrix.try_inverse().unwrap();
        assert!(rel(&numeric, &fi) < 1e-12);
    }

    #[test]
    fn gamma_inverse_block_is_true_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_gaussian(3, &mut rng);
        let f = fim(&g, ParamTag::Gamma).unwrap().matrix;
        let fi = fim_inverse(&g, ParamTag::Gamma).unwrap().matrix;
        let prod = fi.view((3, 3), (6, 6)) * f.view((3, 3), (6, 6));
        assert!((prod - DMatrix::identity(6, 6)).amax() < 1e-10);
    }

    #[test]
    fn inverse_times_fim_is_identity_for_every_tag() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            for _ in 0..10 {
                let g = random_gaussian(n, &mut rng);
                for tag in ParamTag::ALL {
                    let f = fim(&g, tag).unwrap();
                    let fi = fim_inverse(&g, tag).unwrap();
                    let k = tag.coordinate_len(n);
                    assert_eq!(f.matrix.nrows(), k);
                    let r = (&fi.matrix * &f.matrix - DMatrix::identity(k, k)).amax();
                    assert!(r < 1e-9, "{tag} n={n}: {r:e}");
                    assert_eq!(f.matrix, f.matrix.transpose());
                    assert!(f.matrix.clone().cholesky().is_some(), "{tag} not PD");
                }
            }
        }
    }

    #[test]
    fn gamma_is_theta_pulled_back_through_duplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_gaussian(3, &mut rng);
        let j = vech_to_vec_jacobian(3).unwrap();
        let pulled = j.transpose() * fim(&g, ParamTag::Theta).unwrap().matrix * &j;
        assert!(rel(&pulled, &fim(&g, ParamTag::Gamma).unwrap().matrix) < 1e-13);
        let pulled = j.transpose() * fim(&g, ParamTag::Alpha).unwrap().matrix * &j;
        assert!(rel(&pulled, &fim(&g, ParamTag::Beta).unwrap().matrix) < 1e-13);
    }

    #[test]
    fn alpha_and_theta_matrix_blocks_multiply_to_quarter_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_gaussian(3, &mut rng);
        let a = fim(&g, ParamTag::Alpha).unwrap().matrix.view((3, 3), (9, 9)).into_owned();
        let t = fim(&g, ParamTag::Theta).unwrap().matrix.view((3, 3), (9, 9)).into_owned();
        assert!((a * t - DMatrix::identity(9, 9) * 0.25).amax() < 1e-12);
    }

    #[test]
    fn eta_is_alpha_pulled_back_through_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=3 {
            let g = random_gaussian(n, &mut rng);
            let m = alpha_from_eta_jacobian(&g);
            let pulled = m.transpose() * fim(&g, ParamTag::Alpha).unwrap().matrix * &m;
            let direct = fim(&g, ParamTag::Eta).unwrap().matrix;
            assert!((pulled - &direct).amax() < 1e-10 * direct.amax());
        }
    }

    #[test]
    fn coordinates_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_gaussian(3, &mut rng);
        for tag in ParamTag::ALL {
            let c = coordinates(&g, tag);
            assert_eq!(c.len(), tag.coordinate_len(3));
            let back = from_coordinates(&c, tag, 3).unwrap();
            assert!((back.mean() - g.mean()).amax() < 1e-12);
            assert!((back.covariance().to_dense() - g.covariance().to_dense()).amax() < 1e-12);
        }
        assert!(from_coordinates(&DVector::zeros(4), ParamTag::Gamma, 3).is_err());
    }

    #[test]
    fn fd_hessian_scalar_theta() {
        let h = fd_kl_hessian(&scalar(0.0, 1.0), ParamTag::Theta, FD_DEFAULT_STEP, KlArgument::Second)
            .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        assert!((h - expected).amax() < 1e-5);
    }

    #[test]
    fn fd_hessian_matches_fim_for_every_tag() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = random_gaussian(2, &mut rng);
        for tag in ParamTag::ALL {
            let fd = fd_kl_hessian(&g, tag, FD_DEFAULT_STEP, KlArgument::Second).unwrap();
            let r = rel(&fd, &projected_fim(&g, tag).unwrap());
            assert!(r < 1e-4, "{tag}: {r:e}");
        }
    }

    #[test]
    fn fd_hessian_is_symmetric_in_argument_at_coincidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_gaussian(2, &mut rng);
        for tag in [ParamTag::Gamma, ParamTag::Eta] {
            let a = fd_kl_hessian(&g, tag, FD_DEFAULT_STEP, KlArgument::First).unwrap();
            let b = fd_kl_hessian(&g, tag, FD_DEFAULT_STEP, KlArgument::Second).unwrap();
            assert!(rel(&a, &b) < 1e-5, "{tag}");
        }
    }

    #[test]
    fn fd_hessian_shrinks_step_near_the_cone_boundary() {
        // variance 1e-3: a 1e-3 perturbation of vec(Sigma) hits zero variance
        let g = scalar(0.0, 1e-3);
        let fd = fd_kl_hessian(&g, ParamTag::Gamma, 1e-3, KlArgument::Second).unwrap();
        let exact = fim(&g, ParamTag::Gamma).unwrap().matrix;
        // the accepted step is still half the variance, so accuracy is coarse
        assert!(rel(&fd, &exact) < 5e-2);
        assert!(fd_kl_hessian(&g, ParamTag::Gamma, 0.0, KlArgument::Second).is_err());
    }

    #[test]
    fn projector_is_identity_on_symmetric_directions() {
        let s = symmetric_projector(ParamTag::Theta, 2).unwrap();
        let dup = duplication(2).unwrap().dup;
        let j = block_diag(&DMatrix::identity(2, 2), &dup);
        assert!((&s * &j - &j).amax() < 1e-15);
    }
}
