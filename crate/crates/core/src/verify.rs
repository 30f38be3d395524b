//! Self-check suites behind the `verify` command. Each check reports a
//! measured residual against its tolerance.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fim::{fd_kl_hessian, fim, fim_inverse, projected_fim, KlArgument, ParamTag, FD_DEFAULT_STEP};
use crate::gaussian::{GaussianDistribution, MeanCovariance, MeanPrecision};
use crate::kronmat::{duplication, kron, matf, sym, vec, vech, DenseMatrix, SymmetricMatrix};
use crate::ngd::{natural_increment, step_hybrid};
use crate::problem::Problem;
use crate::quadrature::{expect_scalar, ExpectationRule};
use crate::vloss::{derivatives, fd_check, grad_prec_from_hessian, LossFunctional};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self { name: name.into(), residual, tolerance, passed: residual < tolerance }
    }

    fn failed(name: impl Into<String>, error: &Error) -> Self {
        Self { name: format!("{} ({error})", name.into()), residual: f64::INFINITY, tolerance: 0.0, passed: false }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<44} residual {:.3e} (tolerance {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.residual,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Kron,
    Fim,
    Deriv,
    Ngd,
    All,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kron" => Ok(Scope::Kron),
            "fim" => Ok(Scope::Fim),
            "deriv" => Ok(Scope::Deriv),
            "ngd" => Ok(Scope::Ngd),
            "all" => Ok(Scope::All),
            other => Err(Error::Config(format!("unknown scope `{other}` (expected kron, fim, deriv, ngd or all)"))),
        }
    }
}

pub fn run_scope(scope: Scope) -> Vec<Check> {
    match scope {
        Scope::Kron => kron_checks(100, 1),
        Scope::Fim => {
            let mut c = fim_fd_checks(2);
            c.extend(fim_inverse_checks(50, 3));
            c
        }
        Scope::Deriv => {
            let mut c = relation_checks(4);
            c.extend(fd_checks());
            c
        }
        Scope::Ngd => {
            let mut c = symmetry_checks(100, 5);
            c.extend(one_step_checks(20, 6));
            c
        }
        Scope::All => [Scope::Kron, Scope::Fim, Scope::Deriv, Scope::Ngd].into_iter().flat_map(run_scope).collect(),
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `I + A/(2n)` with `A` uniform in `[-1, 1]`: well conditioned.
fn near_identity(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    DMatrix::identity(n, n) + uniform(rng, n, n) / (2.0 * n as f64)
}

fn random_gaussian(rng: &mut ChaCha8Rng, n: usize) -> GaussianDistribution {
    let a = uniform(rng, n, n);
    let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    let mu = uniform(rng, n, 1).column(0) * 1.5;
    MeanCovariance::from_dense(mu, &cov).expect("positive definite by construction").into()
}

fn rank(m: &DenseMatrix) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let tol = sv.max() * 1e-10 * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Duplication and Kronecker identities on `instances` random draws for each
/// dimension 1 to 5; the residual is the worst absolute one.
pub fn kron_checks(instances: usize, seed: u64) -> Vec<Check> {
    const TOL: f64 = 1e-12;
    let names = [
        "vec(a) = a",
        "vec(a b^T) = b (x) a",
        "vec(ABC) = (C^T (x) A) vec(B)",
        "vec(A)^T vec(B) = tr(A^T B)",
        "(A (x) B)(C (x) D) = AC (x) BD",
        "(A (x) B)^-1 = A^-1 (x) B^-1",
        "(A (x) B)^T = A^T (x) B^T",
        "|A (x) B| = |A|^M |B|^N",
        "rank(A (x) B) = rank A rank B",
        "tr(A (x) B) = tr A tr B",
        "a^T B C B^T d = vec(B)^T (C (x) d a^T) vec(B), C symmetric",
        "mat(vec(A)) = A",
        "D+ D = I",
        "D+^T D^T = D D+",
        "D D+ vec(A) = vec(A), A symmetric",
        "D D+ (A (x) A) D = (A (x) A) D",
        "vech(A) = D+ vec(A), A symmetric",
        "matf(vech(A)) = A, A symmetric",
        "D D^T vec(A) = vec(sym(A))",
    ];
    let mut out = Vec::new();
    for n in 1..=5usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000) + n as u64);
        let dup = duplication(n).expect("small dimension");
        let mut worst = vec![0.0f64; names.len()];
        for _ in 0..instances {
            let m = 1 + rng.random_range(0..4usize);
            let a = near_identity(&mut rng, n);
            let b = near_identity(&mut rng, m);
            let c = uniform(&mut rng, n, m);
            let d = uniform(&mut rng, m, n);
            let bb = uniform(&mut rng, n, m);
            let cc = { let t = uniform(&mut rng, m, m); &t + t.transpose() };
            let va = uniform(&mut rng, n, 1);
            let vb = uniform(&mut rng, m, 1);
            let vd = uniform(&mut rng, n, 1);
            let s = { let t = uniform(&mut rng, n, n); &t + t.transpose() };
            let c0 = uniform(&mut rng, n, n);
            let res = [
                (vec(&va) - va.column(0)).amax(),
                (vec(&(&va * vb.transpose())) - vec(&kron(&vb, &va))).amax(),
                (vec(&(&a * &c * &b)) - kron(&b.transpose(), &a) * vec(&c)).amax(),
                (vec(&c).dot(&vec(&bb)) - (c.transpose() * &bb).trace()).abs(),
                (kron(&c, &d) * kron(&b, &a) - kron(&(&c * &b), &(&d * &a))).amax(),
                (kron(&a, &b).try_inverse().expect("invertible")
                    - kron(&a.clone().try_inverse().expect("invertible"), &b.clone().try_inverse().expect("invertible")))
                .amax(),
                (kron(&c, &d).transpose() - kron(&c.transpose(), &d.transpose())).amax(),
                (kron(&a, &b).determinant() - a.determinant().powi(m as i32) * b.determinant().powi(n as i32)).abs(),
                {
                    let low = &c * &d;
                    (rank(&kron(&low, &b)) as f64 - (rank(&low) * rank(&b)) as f64).abs()
                },
                (kron(&a, &b).trace() - a.trace() * b.trace()).abs(),
                {
                    let lhs = (va.transpose() * &bb * &cc * bb.transpose() * &vd)[(0, 0)];
                    let rhs = vec(&bb).dot(&(kron(&cc, &(&vd * va.transpose())) * vec(&bb)));
                    (lhs - rhs).abs()
                },
                (crate::kronmat::mat(&vec(&c), n, m).expect("shape") - &c).amax(),
                (&dup.pinv * &dup.dup - DMatrix::identity(dup.dup.ncols(), dup.dup.ncols())).amax(),
                (dup.pinv.transpose() * dup.dup.transpose() - &dup.dup * &dup.pinv).amax(),
                (&dup.dup * &dup.pinv * vec(&s) - vec(&s)).amax(),
                {
                    let aa = kron(&c0, &c0);
                    (&dup.dup * &dup.pinv * &aa * &dup.dup - &aa * &dup.dup).amax()
                },
                (vech(&s).expect("symmetric") - &dup.pinv * vec(&s)).amax(),
                (matf(&vech(&s).expect("symmetric"), n).expect("length").to_dense() - &s).amax(),
                (&dup.dup * dup.dup.transpose() * vec(&a) - vec(&sym(&a).expect("square"))).amax(),
            ];
            for (w, r) in worst.iter_mut().zip(res) {
                *w = w.max(r);
            }
        }
        for (name, w) in names.iter().zip(worst) {
            out.push(Check::new(format!("kron n={n} {name}"), w, TOL));
        }
    }
    out
}

/// Closed-form FIM against the finite-difference KL Hessian for every tag and
/// `N` in 1 to 3, relative to the largest FIM entry.
pub fn fim_fd_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for n in 1..=3 {
        let g = random_gaussian(&mut rng, n);
        for tag in ParamTag::ALL {
            let name = format!("fim {tag} n={n} vs FD KL Hessian");
            match fd_kl_hessian(&g, tag, FD_DEFAULT_STEP, KlArgument::Second)
                .and_then(|fd| projected_fim(&g, tag).map(|i| (fd, i)))
            {
                Ok((fd, i)) => out.push(Check::new(name, (fd - &i).amax() / i.amax(), 1e-4)),
                Err(e) => out.push(Check::failed(name, &e)),
            }
        }
    }
    out
}

/// `fim_inverse * fim = I` on `instances` random Gaussians per tag.
pub fn fim_inverse_checks(instances: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gs: Vec<_> = (0..instances).map(|k| random_gaussian(&mut rng, 1 + k % 3)).collect();
    ParamTag::ALL
        .into_iter()
        .map(|tag| {
            let name = format!("fim {tag} inverse * fim = I ({instances} draws)");
            let worst = gs.iter().try_fold(0.0f64, |w, g| -> Result<f64> {
                let prod = fim_inverse(g, tag)?.matrix * fim(g, tag)?.matrix;
                let k = prod.nrows();
                Ok(w.max((prod - DMatrix::identity(k, k)).amax()))
            });
            match worst {
                Ok(w) => Check::new(name, w, 1e-9),
                Err(e) => Check::failed(name, &e),
            }
        })
        .collect()
}

/// Sum of monomials `c prod_i x_i^p_i` plus `|x|^2 / 2`, with its analytic
/// Hessian.
#[derive(Debug, Clone)]
struct Polynomial {
    terms: Vec<(f64, Vec<u32>)>,
}

fn power(x: f64, p: u32, drop: u32) -> f64 {
    if p < drop {
        0.0
    } else {
        (p - drop..=p).skip(1).map(f64::from).product::<f64>() * x.powi((p - drop) as i32)
    }
}

impl Polynomial {
    /// Every monomial of total degree `degree` with a random coefficient.
    fn random(rng: &mut ChaCha8Rng, n: usize, degree: u32) -> Self {
        let mut terms = Vec::new();
        let mut powers = vec![0u32; n];
        loop {
            if powers.iter().sum::<u32>() == degree {
                terms.push((rng.random_range(-1.0..1.0), powers.clone()));
            }
            let mut i = 0;
            while i < n {
                powers[i] += 1;
                if powers[i] <= degree {
                    break;
                }
                powers[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        Self { terms }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let base: f64 = x.iter().map(|v| 0.5 * v * v).sum();
        base + self.terms.iter().map(|(c, p)| c * p.iter().zip(x).map(|(&e, v)| v.powi(e as i32)).product::<f64>()).sum::<f64>()
    }

    fn hessian_entry(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let base = if i == j { 1.0 } else { 0.0 };
        base + self
            .terms
            .iter()
            .map(|(c, p)| {
                c * p
                    .iter()
                    .zip(x)
                    .enumerate()
                    .map(|(k, (&e, &v))| power(v, e, u32::from(k == i) + u32::from(k == j)))
                    .product::<f64>()
            })
            .sum::<f64>()
    }
}

/// `max |dV/dSigma^-1 - (Sigma/2 - Sigma E[grad^2 phi] Sigma / 2)|`, with the
/// left side from the weighted moments of `phi` and the expected Hessian
/// integrated from an analytic `grad^2 phi`.
fn relation_against_hessian<H>(
    loss: &LossFunctional,
    hessian_entry: H,
    q: &GaussianDistribution,
    rule: &ExpectationRule,
) -> Result<f64>
where
    H: Fn(&[f64], usize, usize) -> f64,
{
    let n = q.dim();
    let bundle = derivatives(loss, q, rule)?;
    let mut expected = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let e = expect_scalar(rule, q, |x| hessian_entry(x, i, j))?;
            expected[(i, j)] = e;
            expected[(j, i)] = e;
        }
    }
    let implied = grad_prec_from_hessian(&q.covariance().to_dense(), &SymmetricMatrix::symmetrize(&expected)?);
    Ok((bundle.grad_prec.to_dense() - implied.to_dense()).amax())
}

/// The precision-gradient relation for polynomials of degree 1 to
/// `max_degree` under order-5 Gauss-Hermite, and for `cos(sum x)` at order 15.
pub fn relation_checks(max_degree: u32) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut out = Vec::new();
    let gh5 = ExpectationRule::gauss_hermite(5).expect("valid order");
    let gh15 = ExpectationRule::gauss_hermite(15).expect("valid order");
    let mut push = |name: String, r: Result<f64>, tol: f64| match r {
        Ok(r) => out.push(Check::new(name, r, tol)),
        Err(e) => out.push(Check::failed(name, &e)),
    };
    for n in 1..=3 {
        let q = random_gaussian(&mut rng, n);
        for degree in 1..=max_degree {
            let poly = Polynomial::random(&mut rng, n, degree);
            let loss = {
                let poly = poly.clone();
                LossFunctional::new(n, move |x| poly.value(x))
            };
            let r = relation_against_hessian(&loss, |x, i, j| poly.hessian_entry(x, i, j), &q, &gh5);
            push(format!("relation n={n} degree-{degree} polynomial, GH5"), r, 1e-8);
        }
        let loss = LossFunctional::new(n, |x| x.iter().sum::<f64>().cos());
        let r = relation_against_hessian(&loss, |x, _, _| -x.iter().sum::<f64>().cos(), &q, &gh15);
        push(format!("relation n={n} cos(sum x), GH15"), r, 1e-6);
    }
    out
}

fn fd_entry(name: String, loss: &LossFunctional, q: &GaussianDistribution, rule: &ExpectationRule, tol: f64) -> Vec<Check> {
    match fd_check(loss, q, rule, 1e-4) {
        Ok(r) => vec![
            Check::new(format!("{name} grad_mu"), r.grad_mu.rel_error, tol),
            Check::new(format!("{name} hess_mu"), r.hess_mu.rel_error, tol),
            Check::new(format!("{name} grad_prec"), r.grad_prec.rel_error, tol),
        ],
        Err(e) => vec![Check::failed(name, &e)],
    }
}

/// Analytic derivatives against finite differences of `V`: quadratic `phi`
/// in 1 to 3 variables, and the bundled logistic problem.
pub fn fd_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut out = Vec::new();
    let gh3 = ExpectationRule::gauss_hermite(3).expect("valid order");
    for n in 1..=3 {
        let q = random_gaussian(&mut rng, n);
        let a = uniform(&mut rng, n, n);
        let p = &a * a.transpose() + DMatrix::identity(n, n);
        let m = uniform(&mut rng, n, 1).column(0).into_owned();
        let loss = LossFunctional::new(n, move |x| {
            let d = DVector::from_column_slice(x) - &m;
            0.5 * d.dot(&(&p * &d))
        });
        out.extend(fd_entry(format!("fd quadratic n={n}"), &loss, &q, &gh3, 1e-5));
    }
    match Problem::bundled("logistic_1d").and_then(|p| p.graph().map(|g| (p, g))) {
        Ok((p, g)) => {
            let loss = g.to_loss();
            for (label, mu, var) in [("initial", None, None), ("shifted", Some(1.2), Some(0.4))] {
                let q = match (mu, var) {
                    (Some(mu), Some(var)) => MeanCovariance::from_dense(
                        DVector::from_element(1, mu),
                        &DMatrix::from_element(1, 1, var),
                    )
                    .expect("positive variance")
                    .into(),
                    _ => p.initial.clone(),
                };
                out.extend(fd_entry(format!("fd logistic_1d {label}"), &loss, &q, &p.config.rule, 1e-4));
            }
        }
        Err(e) => out.push(Check::failed("fd logistic_1d", &e)),
    }
    out
}

/// Symmetry-aware and symmetry-blind natural-gradient increments agree:
/// `D dSigma_gamma = dSigma_theta` and `D dSigma^-1_beta = dSigma^-1_alpha`.
pub fn symmetry_checks(instances: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 2];
    let mut error = None;
    for k in 0..instances {
        let n = 1 + k % 4;
        let q = random_gaussian(&mut rng, n);
        let g = uniform(&mut rng, n, 1).column(0).into_owned();
        let t = uniform(&mut rng, n, n);
        let gm = &t + t.transpose();
        let dup = duplication(n).expect("small dimension");
        let stack = |block: DVector<f64>| {
            let mut v = DVector::zeros(n + block.len());
            v.rows_mut(0, n).copy_from(&g);
            v.rows_mut(n, block.len()).copy_from(&block);
            v
        };
        let blind = stack(vec(&gm));
        let aware = stack(dup.reduce_gradient(&gm));
        for (slot, (b_tag, a_tag)) in [(ParamTag::Theta, ParamTag::Gamma), (ParamTag::Alpha, ParamTag::Beta)].into_iter().enumerate() {
            match natural_increment(&q, b_tag, &blind).and_then(|b| natural_increment(&q, a_tag, &aware).map(|a| (b, a))) {
                Ok((b, a)) => {
                    let h = a.len() - n;
                    let r = (b.rows(n, n * n) - &dup.dup * a.rows(n, h)).amax().max((b.rows(0, n) - a.rows(0, n)).amax());
                    worst[slot] = worst[slot].max(r);
                }
                Err(e) => error = Some(e),
            }
        }
    }
    if let Some(e) = error {
        return vec![Check::failed("symmetry equivalence", &e)];
    }
    vec![
        Check::new(format!("ngd theta vs gamma dSigma ({instances} draws)"), worst[0], 1e-10),
        Check::new(format!("ngd alpha vs beta dSigma^-1 ({instances} draws)"), worst[1], 1e-10),
    ]
}

/// Random prior plus linear observations; one hybrid step from a random start
/// must land on the closed-form posterior.
pub fn one_step_checks(instances: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = ExpectationRule::gauss_hermite(3).expect("valid order");
    let mut worst = 0.0f64;
    for k in 0..instances {
        let n = 1 + k % 4;
        let obs = 1 + rng.random_range(0..3usize);
        let a = uniform(&mut rng, n, n);
        let p0 = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let m0 = uniform(&mut rng, n, 1).column(0).into_owned();
        let h = uniform(&mut rng, obs, n);
        let r_inv = DMatrix::from_diagonal(&DVector::from_fn(obs, |_, _| rng.random_range(0.5..4.0)));
        let z = uniform(&mut rng, obs, 1).column(0) * 2.0;
        let post_prec = &p0 + h.transpose() * &r_inv * &h;
        let post_mean = post_prec.clone().cholesky().expect("positive definite").solve(&(&p0 * &m0 + h.transpose() * &r_inv * &z));
        let loss = {
            let (p0, m0, h, r_inv, z) = (p0.clone(), m0.clone(), h.clone(), r_inv.clone(), z.clone());
            LossFunctional::new(n, move |x| {
                let x = DVector::from_column_slice(x);
                let d = &x - &m0;
                let e = &z - &h * &x;
                0.5 * d.dot(&(&p0 * &d)) + 0.5 * e.dot(&(&r_inv * &e))
            })
        };
        let q0 = match random_gaussian(&mut rng, n).to_mean_precision() {
            Ok(q) => q,
            Err(e) => return vec![Check::failed("one-step exactness", &e)],
        };
        let step = derivatives(&loss, &q0.clone().into(), &rule).and_then(|d| step_hybrid(&q0, &d));
        match step {
            Ok(q1) => {
                let r = (q1.mean() - &post_mean).amax().max((q1.prec().to_dense() - &post_prec).amax());
                worst = worst.max(r);
            }
            Err(e) => return vec![Check::failed("one-step exactness", &e)],
        }
    }
    vec![Check::new(format!("ngd one-step exactness ({instances} linear-Gaussian draws)"), worst, 1e-10)]
}

/// Checks that a precision's nonzeros lie in the pattern induced by the
/// given factor index sets; returns the first offending entry.
pub fn support_outside(prec: &SymmetricMatrix, factor_indices: &[Vec<usize>]) -> Option<(usize, usize)> {
    let n = prec.dim();
    for j in 0..n {
        for i in j + 1..n {
            if prec.get(i, j) != 0.0 && !factor_indices.iter().any(|f| f.contains(&i) && f.contains(&j)) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Starting precision with every pattern entry filled, for sparsity checks
/// that should not pass merely because the start was diagonal.
pub fn dense_within_pattern(n: usize, factor_indices: &[Vec<usize>]) -> Result<MeanPrecision> {
    let mut p = DMatrix::identity(n, n) * (n as f64);
    for f in factor_indices {
        for &i in f {
            for &j in f {
                if i != j {
                    p[(i, j)] = -0.5;
                }
            }
        }
    }
    MeanPrecision::from_dense(DVector::zeros(n), &p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scopes_parse() {
        assert_eq!("fim".parse::<Scope>().unwrap(), Scope::Fim);
        assert!("nope".parse::<Scope>().is_err());
    }

    #[test]
    fn kron_suite_passes() {
        let checks = kron_checks(10, 11);
        assert_eq!(checks.len(), 5 * 19);
        for c in &checks {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn small_suites_pass() {
        for c in fim_inverse_checks(10, 1).into_iter().chain(symmetry_checks(10, 2)).chain(one_step_checks(5, 3)) {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn polynomial_hessian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Polynomial::random(&mut rng, 3, 4);
        let x = [0.3, -0.7, 1.1];
        let h = 1e-4;
        for i in 0..3 {
            for j in 0..3 {
                let at = |di: f64, dj: f64| {
                    let mut y = x;
                    y[i] += di;
                    y[j] += dj;
                    p.value(&y)
                };
                let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                assert!((fd - p.hessian_entry(&x, i, j)).abs() < 1e-6, "{i} {j}");
            }
        }
    }

    #[test]
    fn relation_detects_wrong_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_gaussian(&mut rng, 2);
        let loss = LossFunctional::new(2, |x| x[0].powi(4) + x[0] * x[1]);
        let rule = ExpectationRule::gauss_hermite(5).unwrap();
        let wrong = relation_against_hessian(&loss, |x, i, j| if i == 0 && j == 0 { 12.0 * x[0] * x[0] } else { 0.0 }, &q, &rule)
            .unwrap();
        assert!(wrong > 1e-3);
        let right = relation_against_hessian(
            &loss,
            |x, i, j| match (i, j) {
                (0, 0) => 12.0 * x[0] * x[0],
                (1, 1) => 0.0,
                _ => 1.0,
            },
            &q,
            &rule,
        )
        .unwrap();
        assert!(right < 1e-10);
    }

    #[test]
    fn support_detection() {
        let p = SymmetricMatrix::from_half(vec![1.0, 0.0, 0.2, 1.0, 0.0, 1.0], 3).unwrap();
        assert_eq!(support_outside(&p, &[vec![0, 1], vec![1, 2]]), Some((2, 0)));
        assert_eq!(support_outside(&p, &[vec![0, 2], vec![1]]), None);
    }
}
