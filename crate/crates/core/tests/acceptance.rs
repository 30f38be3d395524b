//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;

use gaussian_ngd::factors::FactoredSolver;
use gaussian_ngd::kronmat::SymmetricMatrix;
use gaussian_ngd::ngd::NgdConfig;
use gaussian_ngd::problem::{solve, Overrides, Problem};
use gaussian_ngd::verify::{self, dense_within_pattern, support_outside, Check};
use gaussian_ngd::MeanPrecision;
use sha2::{Digest, Sha256};

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_checks(checks: &[Check]) -> Outcome {
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    let worst = checks
        .iter()
        .max_by(|a, b| (a.residual / a.tolerance).total_cmp(&(b.residual / b.tolerance)))
        .expect("non-empty suite");
    let mut detail = format!(
        "{} checks, worst {:.3e} vs {:.0e} ({})",
        checks.len(),
        worst.residual,
        worst.tolerance,
        worst.name
    );
    for f in &failed {
        detail.push_str(&format!("\n      failed: {f}"));
    }
    Outcome { passed: failed.is_empty(), detail }
}

fn one_step() -> Outcome {
    let mut checks = verify::one_step_checks(50, 6);
    let p = Problem::bundled("scalar_gaussian").expect("bundled");
    match solve(&p, &Overrides::default()) {
        Ok(s) => {
            let q = &s.outcome.trace.records[1];
            let mean_err = (q.mean[0] - 5.0 / 3.0).abs();
            let prec_err = (s.outcome.estimate.prec().get(0, 0) - 6.0).abs();
            checks.push(Check::new("scalar_gaussian after one step", mean_err.max(prec_err), 1e-10));
        }
        Err(e) => checks.push(Check::new(format!("scalar_gaussian ({e})"), f64::INFINITY, 1e-10)),
    }
    from_checks(&checks)
}

fn sparsity() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    for name in ["linear_chain", "range_slam_toy"] {
        let p = Problem::bundled(name).expect("bundled");
        let indices: Vec<Vec<usize>> = p.factors.iter().map(|f| f.indices.clone()).collect();
        let starts = [
            ("file start", p.initial.to_mean_precision().expect("valid initial")),
            ("filled start", {
                let dense = dense_within_pattern(p.dimension, &indices).expect("diagonally dominant");
                MeanPrecision::new(p.initial.mean(), dense.prec().clone()).expect("valid")
            }),
        ];
        for (label, q0) in starts {
            let cfg = NgdConfig { max_iters: 30, ..p.config };
            let mut solver = FactoredSolver::new(p.graph().expect("graph"), q0, cfg).expect("solver");
            let mut iterates = 1;
            let mut outside = support_outside(solver.estimate().prec(), &indices);
            let mut error = None;
            while outside.is_none() && solver.iter() < cfg.max_iters {
                let before: SymmetricMatrix = solver.estimate().prec().clone();
                match solver.step() {
                    Ok(q) => {
                        iterates += 1;
                        outside = support_outside(q.prec(), &indices);
                        if q.prec() == &before {
                            break;
                        }
                    }
                    Err(e) => {
                        error = Some(e);
                        break;
                    }
                }
            }
            let ok = outside.is_none() && error.is_none();
            passed &= ok;
            lines.push(format!(
                "{name} ({label}): {iterates} iterates, {}",
                match (outside, error) {
                    (Some((i, j)), _) => format!("entry ({i}, {j}) outside pattern"),
                    (None, Some(e)) => format!("error {e}"),
                    (None, None) => "support within pattern".into(),
                }
            ));
        }
    }
    Outcome { passed, detail: lines.join("; ") }
}

fn loss_decrease() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    for name in ["logistic_1d", "range_slam_toy"] {
        let p = Problem::bundled(name).expect("bundled");
        match solve(&p, &Overrides::default()) {
            Ok(s) => {
                let trace = &s.outcome.trace;
                let violations = trace.decrease_violations().len();
                let worst = trace.max_increase();
                let ok = violations == 0 && worst <= gaussian_ngd::ngd::DECREASE_TOL && s.outcome.converged();
                passed &= ok;
                lines.push(format!(
                    "{name}: {} steps, largest increase {worst:.3e}, {violations} flagged",
                    trace.len() - 1
                ));
            }
            Err(e) => {
                passed = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome { passed, detail: lines.join("; ") }
}

fn digest(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap_or_default();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_gaussian-ngd");
    let problems = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems");
    let tmp = tempfile::tempdir().expect("temp dir");
    let cases: [(&str, &[&str]); 5] = [
        ("scalar_gaussian", &[]),
        ("linear_chain", &[]),
        ("logistic_1d", &[]),
        ("range_slam_toy", &[]),
        ("logistic_1d", &["--rule", "monte_carlo", "--order", "4000", "--seed", "17"]),
    ];
    let mut passed = true;
    let mut compared = 0;
    for (k, (name, extra)) in cases.iter().enumerate() {
        let mut hashes = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{k}-{run}"));
            let status = Command::new(bin)
                .arg("run")
                .arg(problems.join(format!("{name}.problem")))
                .arg("--out")
                .arg(&out)
                .args(*extra)
                .output()
                .expect("binary runs");
            passed &= status.status.code().is_some_and(|c| c == 0 || c == 2);
            hashes.push((digest(&out.join("trace.csv")), digest(&out.join("estimate.toml"))));
        }
        compared += 2;
        passed &= hashes[0] == hashes[1];
    }
    Outcome { passed, detail: format!("{compared} file pairs over {} repeated runs compared by SHA-256", cases.len()) }
}

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("duplication and Kronecker identities", Box::new(|| from_checks(&verify::kron_checks(100, 1)))),
        ("FIM vs finite-difference KL Hessian", Box::new(|| from_checks(&verify::fim_fd_checks(2)))),
        ("closed-form inverse FIMs", Box::new(|| from_checks(&verify::fim_inverse_checks(50, 3)))),
        ("symmetry-aware vs symmetry-blind steps", Box::new(|| from_checks(&verify::symmetry_checks(100, 5)))),
        ("derivative relation", Box::new(|| from_checks(&verify::relation_checks(4)))),
        ("one-step exactness", Box::new(one_step)),
        ("sparsity preservation", Box::new(sparsity)),
        ("loss decrease", Box::new(loss_decrease)),
        ("derivative finite-difference validation", Box::new(|| from_checks(&verify::fd_checks()))),
        ("determinism of repeated runs", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        if !outcome.passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            k + 1,
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
