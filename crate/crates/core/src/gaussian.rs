//! Gaussian representations, conversions, log-density, sampling and KL.
//!
//! Each form validates positive definiteness at construction by factoring
//! the matrix it stores (covariance or precision). Later operations reuse
//! that Cholesky factor; determinants come from its pivots in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kronmat::SymmetricMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormTag {
    MeanCovariance,
    MeanPrecision,
    Natural,
}

fn factor(m: &SymmetricMatrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    let dense = m.to_dense();
    if dense.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!("{what} has non-finite entries")));
    }
    Cholesky::new(dense)
        .ok_or_else(|| Error::NotPositiveDefinite(format!("Cholesky factorization of {what} failed")))
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn inverse_of(chol: &Cholesky<f64, Dyn>) -> SymmetricMatrix {
    // the inverse is symmetric analytically; keep one value per pair
    SymmetricMatrix::symmetrize(&chol.inverse()).expect("square")
}

fn check_mean(mean: &DVector<f64>, dim: usize) -> Result<()> {
    if mean.len() != dim {
        return Err(Error::Dimension(format!(
            "mean has length {} but matrix is {dim}x{dim}",
            mean.len()
        )));
    }
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("mean has non-finite entries".into()));
    }
    Ok(())
}

/// Mean and covariance, `N(mu, Sigma)`.
#[derive(Debug, Clone)]
pub struct MeanCovariance {
    mean: DVector<f64>,
    cov: SymmetricMatrix,
    chol: Cholesky<f64, Dyn>,
}

impl MeanCovariance {
    pub fn new(mean: DVector<f64>, cov: SymmetricMatrix) -> Result<Self> {
        check_mean(&mean, cov.dim())?;
        let chol = factor(&cov, "covariance")?;
        Ok(Self { mean, cov, chol })
    }

    /// Accepts a dense covariance that must be symmetric.
    pub fn from_dense(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        Self::new(mean, SymmetricMatrix::from_dense(cov)?)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymmetricMatrix {
        &self.cov
    }

    pub fn chol(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Mean and precision (inverse covariance).
#[derive(Debug, Clone)]
pub struct MeanPrecision {
    mean: DVector<f64>,
    prec: SymmetricMatrix,
    chol: Cholesky<f64, Dyn>,
}

impl MeanPrecision {
    pub fn new(mean: DVector<f64>, prec: SymmetricMatrix) -> Result<Self> {
        check_mean(&mean, prec.dim())?;
        let chol = factor(&prec, "precision")?;
        Ok(Self { mean, prec, chol })
    }

    pub fn from_dense(mean: DVector<f64>, prec: &DMatrix<f64>) -> Result<Self> {
        Self::new(mean, SymmetricMatrix::from_dense(prec)?)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn prec(&self) -> &SymmetricMatrix {
        &self.prec
    }

    pub fn chol(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Inverse covariance form: `eta1 = Sigma^-1 mu`, `eta2 = Sigma^-1`.
#[derive(Debug, Clone)]
pub struct NaturalForm {
    eta1: DVector<f64>,
    eta2: SymmetricMatrix,
    chol: Cholesky<f64, Dyn>,
}

impl NaturalForm {
    pub fn new(eta1: DVector<f64>, eta2: SymmetricMatrix) -> Result<Self> {
        check_mean(&eta1, eta2.dim())?;
        let chol = factor(&eta2, "natural precision")?;
        Ok(Self { eta1, eta2, chol })
    }

    pub fn eta1(&self) -> &DVector<f64> {
        &self.eta1
    }

    pub fn eta2(&self) -> &SymmetricMatrix {
        &self.eta2
    }

    pub fn dim(&self) -> usize {
        self.eta1.len()
    }
}

/// A Gaussian in any of the three interchangeable forms.
#[derive(Debug, Clone)]
pub enum GaussianDistribution {
    MeanCovariance(MeanCovariance),
    MeanPrecision(MeanPrecision),
    Natural(NaturalForm),
}

impl From<MeanCovariance> for GaussianDistribution {
    fn from(g: MeanCovariance) -> Self {
        GaussianDistribution::MeanCovariance(g)
    }
}

impl From<MeanPrecision> for GaussianDistribution {
    fn from(g: MeanPrecision) -> Self {
        GaussianDistribution::MeanPrecision(g)
    }
}

impl From<NaturalForm> for GaussianDistribution {
    fn from(g: NaturalForm) -> Self {
        GaussianDistribution::Natural(g)
    }
}

impl GaussianDistribution {
    pub fn form(&self) -> FormTag {
        match self {
            GaussianDistribution::MeanCovariance(_) => FormTag::MeanCovariance,
            GaussianDistribution::MeanPrecision(_) => FormTag::MeanPrecision,
            GaussianDistribution::Natural(_) => FormTag::Natural,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GaussianDistribution::MeanCovariance(g) => g.dim(),
            GaussianDistribution::MeanPrecision(g) => g.dim(),
            GaussianDistribution::Natural(g) => g.dim(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            GaussianDistribution::MeanCovariance(g) => g.mean.clone(),
            GaussianDistribution::MeanPrecision(g) => g.mean.clone(),
            GaussianDistribution::Natural(g) => g.chol.solve(&g.eta1),
        }
    }

    pub fn covariance(&self) -> SymmetricMatrix {
        match self {
            GaussianDistribution::MeanCovariance(g) => g.cov.clone(),
            GaussianDistribution::MeanPrecision(g) => inverse_of(&g.chol),
            GaussianDistribution::Natural(g) => inverse_of(&g.chol),
        }
    }

    pub fn precision(&self) -> SymmetricMatrix {
        match self {
            GaussianDistribution::MeanCovariance(g) => inverse_of(&g.chol),
            GaussianDistribution::MeanPrecision(g) => g.prec.clone(),
            GaussianDistribution::Natural(g) => g.eta2.clone(),
        }
    }

    /// `ln |Sigma|`.
    pub fn log_det_cov(&self) -> f64 {
        match self {
            GaussianDistribution::MeanCovariance(g) => log_det(&g.chol),
            GaussianDistribution::MeanPrecision(g) => -log_det(&g.chol),
            GaussianDistribution::Natural(g) => -log_det(&g.chol),
        }
    }

    /// Lower-triangular `L` with `L L^T = Sigma`.
    pub fn cov_sqrt(&self) -> DMatrix<f64> {
        match self {
            GaussianDistribution::MeanCovariance(g) => g.chol.l(),
            _ => Cholesky::new(self.covariance().to_dense())
                .expect("inverse of a positive definite matrix")
                .l(),
        }
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::Dimension(format!(
                "point has length {} but distribution has dimension {n}",
                x.len()
            )));
        }
        let mean = self.mean();
        let d = x - &mean;
        let quad = match self {
            GaussianDistribution::MeanCovariance(g) => {
                let z = g.chol.l_dirty().solve_lower_triangular(&d).expect("nonzero pivots");
                z.norm_squared()
            }
            GaussianDistribution::MeanPrecision(MeanPrecision { chol, .. })
            | GaussianDistribution::Natural(NaturalForm { chol, .. }) => {
                (chol.l().transpose() * &d).norm_squared()
            }
        };
        Ok(-0.5 * (quad + self.log_det_cov() + n as f64 * LN_2PI))
    }

    pub fn to_mean_covariance(&self) -> Result<MeanCovariance> {
        match self {
            GaussianDistribution::MeanCovariance(g) => Ok(g.clone()),
            _ => MeanCovariance::new(self.mean(), self.covariance()),
        }
    }

    pub fn to_mean_precision(&self) -> Result<MeanPrecision> {
        match self {
            GaussianDistribution::MeanPrecision(g) => Ok(g.clone()),
            GaussianDistribution::Natural(g) => MeanPrecision::new(self.mean(), g.eta2.clone()),
            GaussianDistribution::MeanCovariance(_) => {
                MeanPrecision::new(self.mean(), self.precision())
            }
        }
    }

    pub fn to_natural(&self) -> Result<NaturalForm> {
        match self {
            GaussianDistribution::Natural(g) => Ok(g.clone()),
            GaussianDistribution::MeanPrecision(g) => {
                NaturalForm::new(g.prec.to_dense() * &g.mean, g.prec.clone())
            }
            GaussianDistribution::MeanCovariance(g) => {
                let prec = inverse_of(&g.chol);
                NaturalForm::new(g.chol.solve(&g.mean), prec)
            }
        }
    }

    pub fn convert(&self, target: FormTag) -> Result<GaussianDistribution> {
        Ok(match target {
            FormTag::MeanCovariance => self.to_mean_covariance()?.into(),
            FormTag::MeanPrecision => self.to_mean_precision()?.into(),
            FormTag::Natural => self.to_natural()?.into(),
        })
    }

    /// Draws `count` samples from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
        if count < 1 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        let n = self.dim();
        let mean = self.mean();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| -> DVector<f64> {
            DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
        };
        let out = match self {
            GaussianDistribution::MeanCovariance(g) => {
                let l = g.chol.l();
                (0..count).map(|_| &mean + &l * draw(&mut rng)).collect()
            }
            GaussianDistribution::MeanPrecision(MeanPrecision { chol, .. })
            | GaussianDistribution::Natural(NaturalForm { chol, .. }) => {
                // x = mu + L^-T z has covariance (L L^T)^-1
                let lt = chol.l().transpose();
                (0..count)
                    .map(|_| {
                        let z = draw(&mut rng);
                        &mean + lt.solve_upper_triangular(&z).expect("nonzero pivots")
                    })
                    .collect()
            }
        };
        Ok(out)
    }
}

/// Closed-form `KL(q || p)` between two Gaussians.
pub fn kl(q: &MeanCovariance, p: &MeanCovariance) -> Result<f64> {
    let n = q.dim();
    if p.dim() != n {
        return Err(Error::Dimension(format!(
            "KL between dimensions {n} and {}",
            p.dim()
        )));
    }
    let trace = p.chol.solve(&q.cov.to_dense()).trace();
    let d = &p.mean - &q.mean;
    let z = p.chol.l_dirty().solve_lower_triangular(&d).expect("nonzero pivots");
    let value = 0.5 * (trace + z.norm_squared() - n as f64 + log_det(&p.chol) - log_det(&q.chol));
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    fn scalar(mu: f64, var: f64) -> MeanCovariance {
        MeanCovariance::from_dense(DVector::from_element(1, mu), &DMatrix::from_element(1, 1, var))
            .unwrap()
    }

    #[test]
    fn log_pdf_standard_normal_at_zero() {
        let g: GaussianDistribution = scalar(0.0, 1.0).into();
        let v = g.log_pdf(&DVector::zeros(1)).unwrap();
        assert_relative_eq!(v, -0.918_938_533_204_672_7, epsilon = 1e-15);
    }

    #[test]
    fn log_pdf_at_mean_is_normalizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cov = random_spd(3, &mut rng);
        let mu = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let g: GaussianDistribution = MeanCovariance::from_dense(mu.clone(), &cov).unwrap().into();
        let expected = -0.5 * (3.0 * LN_2PI + cov.determinant().ln());
        assert_relative_eq!(g.log_pdf(&mu).unwrap(), expected, epsilon = 1e-12);
        assert!(matches!(g.log_pdf(&DVector::zeros(2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn log_pdf_is_form_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cov = random_spd(3, &mut rng);
        let mu = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let g: GaussianDistribution = MeanCovariance::from_dense(mu, &cov).unwrap().into();
        let forms = [
            g.convert(FormTag::MeanCovariance).unwrap(),
            g.convert(FormTag::MeanPrecision).unwrap(),
            g.convert(FormTag::Natural).unwrap(),
        ];
        for _ in 0..20 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let base = forms[0].log_pdf(&x).unwrap();
            for f in &forms[1..] {
                assert!((f.log_pdf(&x).unwrap() - base).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn convert_examples() {
        let g: GaussianDistribution = MeanCovariance::new(DVector::zeros(2), SymmetricMatrix::identity(2))
            .unwrap()
            .into();
        let nat = g.to_natural().unwrap();
        assert_eq!(nat.eta1().as_slice(), &[0.0, 0.0]);
        assert_eq!(nat.eta2().to_dense(), DMatrix::identity(2, 2));

        let g: GaussianDistribution = scalar(1.0, 2.0).into();
        let nat = g.to_natural().unwrap();
        assert_relative_eq!(nat.eta1()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(nat.eta2().get(0, 0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn construction_rejects_non_pd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            MeanCovariance::from_dense(DVector::zeros(2), &bad),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            MeanPrecision::from_dense(DVector::zeros(2), &bad),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            MeanCovariance::from_dense(DVector::zeros(3), &DMatrix::identity(2, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn kl_examples() {
        let q = scalar(0.0, 1.0);
        assert_eq!(kl(&q, &q).unwrap(), 0.0);
        assert_relative_eq!(kl(&q, &scalar(1.0, 1.0)).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            kl(&scalar(0.0, 2.0), &q).unwrap(),
            0.5 * (2.0 - 1.0 - 2f64.ln()),
            epsilon = 1e-15
        );
        let p2 = MeanCovariance::new(DVector::zeros(2), SymmetricMatrix::identity(2)).unwrap();
        assert!(matches!(kl(&q, &p2), Err(Error::Dimension(_))));
    }

    #[test]
    fn kl_matches_monte_carlo_integration() {
        // E_q[ln q - ln p] estimated from samples of q
        let q = scalar(0.0, 1.0);
        let p: GaussianDistribution = scalar(1.0, 1.0).into();
        let qd: GaussianDistribution = q.clone().into();
        let xs = qd.sample(200_000, 11).unwrap();
        let est: f64 = xs
            .iter()
            .map(|x| qd.log_pdf(x).unwrap() - p.log_pdf(x).unwrap())
            .sum::<f64>()
            / xs.len() as f64;
        // integrand is x - 1/2 with unit variance: 4 standard errors
        assert!((est - 0.5).abs() < 4.0 / (xs.len() as f64).sqrt());
    }

    #[test]
    fn sample_is_deterministic_and_consistent() {
        let g: GaussianDistribution = MeanCovariance::new(DVector::zeros(2), SymmetricMatrix::identity(2))
            .unwrap()
            .into();
        let a = g.sample(100_000, 7).unwrap();
        assert_eq!(a, g.sample(100_000, 7).unwrap());
        let mean = a.iter().fold(DVector::zeros(2), |acc, x| acc + x) / a.len() as f64;
        assert!(mean.amax() < 0.02);
        assert!(matches!(g.sample(0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn sample_covariance_concentrates() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let mu = DVector::from_vec(vec![1.0, -2.0]);
        for g in [
            GaussianDistribution::from(MeanCovariance::from_dense(mu.clone(), &cov).unwrap()),
            GaussianDistribution::from(
                MeanPrecision::from_dense(mu.clone(), &cov.clone().try_inverse().unwrap()).unwrap(),
            ),
        ] {
            let xs = g.sample(100_000, 3).unwrap();
            let n = xs.len() as f64;
            let m = xs.iter().fold(DVector::zeros(2), |acc, x| acc + x) / n;
            let s = xs
                .iter()
                .fold(DMatrix::zeros(2, 2), |acc, x| acc + (x - &m) * (x - &m).transpose())
                / n;
            assert!(((s - &cov).abs().component_div(&cov.abs())).amax() < 0.05);
        }
    }

    #[test]
    fn round_trip_through_all_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let cov = random_spd(4, &mut rng);
            let mu = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let g: GaussianDistribution = MeanCovariance::from_dense(mu.clone(), &cov).unwrap().into();
            let back = g
                .convert(FormTag::Natural)
                .unwrap()
                .convert(FormTag::MeanPrecision)
                .unwrap()
                .convert(FormTag::MeanCovariance)
                .unwrap();
            let scale = cov.amax();
            assert!((back.covariance().to_dense() - &cov).amax() < 1e-10 * scale);
            assert!((back.mean() - &mu).amax() < 1e-10 * mu.amax().max(1.0));
        }
    }
}
