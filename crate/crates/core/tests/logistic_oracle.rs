//! The hybrid fixed point on the 1-D logistic problem against a brute-force
//! minimizer of `V(mu, sigma)` computed by dense grid integration.

use gaussian_ngd::problem::{solve, Overrides, Problem};

const PRIOR_PRECISION: f64 = 0.25;
const DATA: [(f64, f64); 7] = [(1.0, 1.0), (0.5, 1.0), (-0.3, 0.0), (2.0, 1.0), (-1.2, 0.0), (0.8, 0.0), (1.5, 1.0)];

fn phi(x: f64) -> f64 {
    let likelihood: f64 = DATA
        .iter()
        .map(|&(a, y)| {
            let z = a * x;
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - y * z
        })
        .sum();
    0.5 * PRIOR_PRECISION * x * x + likelihood
}

/// `E[phi] - ln sigma` by composite Simpson over `mu +- 12 sigma`.
fn loss(mu: f64, sigma: f64) -> f64 {
    let cells = 4000;
    let (lo, hi) = (-12.0, 12.0);
    let h = (hi - lo) / cells as f64;
    let mut s = 0.0;
    for k in 0..=cells {
        let t = lo + k as f64 * h;
        let w = if k == 0 || k == cells { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let density = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        s += w * density * phi(mu + sigma * t);
    }
    s * h / 3.0 - sigma.ln()
}

fn golden<F: Fn(f64) -> f64>(mut a: f64, mut b: f64, f: F) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-9 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[test]
fn hybrid_fixed_point_matches_grid_oracle() {
    let best_mu = |sigma: f64| golden(-5.0, 5.0, |mu| loss(mu, sigma));
    let log_sigma = golden((0.05f64).ln(), (5.0f64).ln(), |ls| {
        let sigma = ls.exp();
        loss(best_mu(sigma), sigma)
    });
    let sigma = log_sigma.exp();
    let mu = best_mu(sigma);

    let problem = Problem::bundled("logistic_1d").unwrap();
    let solution = solve(&problem, &Overrides::default()).unwrap();
    assert!(solution.outcome.converged(), "{:?}", solution.outcome.termination);
    let q = &solution.outcome.estimate;
    let precision = 1.0 / (sigma * sigma);
    assert!((q.mean()[0] - mu).abs() < 1e-4, "mean {} vs oracle {mu}", q.mean()[0]);
    assert!((q.prec().get(0, 0) - precision).abs() < 1e-4, "precision {} vs oracle {precision}", q.prec().get(0, 0));
}
