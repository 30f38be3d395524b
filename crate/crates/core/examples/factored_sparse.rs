//! Factored loss on a chain: the precision keeps the factor sparsity pattern.

use gaussian_ngd::factors::optimize_factored;
use gaussian_ngd::{ExpectationRule, Factor, FactorGraph, MeanPrecision, NgdConfig, SymmetricMatrix};
use nalgebra::DVector;

fn main() -> gaussian_ngd::Result<()> {
    let n = 6;
    let mut factors = vec![Factor::new("anchor", vec![0], |x| 2.0 * x[0] * x[0])?];
    for i in 0..n - 1 {
        // a nonlinear link between neighbours
        factors.push(Factor::new(format!("link{i}"), vec![i, i + 1], |x| {
            let d = x[1] - x[0] - 1.0;
            d * d + 0.1 * d.powi(4)
        })?);
    }
    let graph = FactorGraph::new(n, factors)?;
    let pattern = graph.pattern();
    println!("pattern has {} stored entries of {}", pattern.len(), n * (n + 1) / 2);

    let q0 = MeanPrecision::new(DVector::zeros(n), SymmetricMatrix::identity(n))?;
    let cfg = NgdConfig { rel_tol: 1e-10, ..NgdConfig::with_rule(ExpectationRule::gauss_hermite(6)?) };
    let out = optimize_factored(&graph, &q0, &cfg)?;
    println!("{:?} after {} iterations", out.termination, out.trace.len() - 1);
    println!("mean = {:.4}", out.estimate.mean().transpose());
    println!("precision ={:.3}", out.estimate.prec().to_dense());
    pattern.check(out.estimate.prec())?;
    Ok(())
}
