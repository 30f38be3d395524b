use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaussian_ngd::ngd::Termination;
use gaussian_ngd::problem::{self, parse_rule_kind, Overrides};
use gaussian_ngd::verify::{run_scope, Scope};

#[derive(Parser)]
#[command(version, about = "Natural gradient descent for Gaussian variational inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write trace.csv, estimate.toml and manifest.toml.
    Run {
        problem: PathBuf,
        /// Output directory (created if missing).
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Expectation rule: gauss_hermite or monte_carlo.
        #[arg(long, value_parser = parse_rule)]
        rule: Option<gaussian_ngd::quadrature::RuleKind>,
        /// Gauss-Hermite order, or Monte Carlo sample count.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        rel_tol: Option<f64>,
        #[arg(long)]
        step_scale: Option<f64>,
        #[arg(long)]
        jitter: Option<f64>,
        /// Start from a previous estimate.toml instead of the problem's initial q.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Run the built-in oracle checks.
    Verify {
        #[arg(long, default_value = "all", value_parser = parse_scope)]
        scope: Scope,
    },
}

fn parse_rule(s: &str) -> Result<gaussian_ngd::quadrature::RuleKind, String> {
    parse_rule_kind(s).map_err(|e| e.to_string())
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    s.parse().map_err(|e: gaussian_ngd::Error| e.to_string())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { problem, out, rule, order, seed, max_iters, rel_tol, step_scale, jitter, init } => {
            let overrides = Overrides { rule, order, seed, max_iters, rel_tol, step_scale, jitter, init };
            match problem::run(&problem, &out, &overrides) {
                Ok(report) => {
                    let outcome = &report.solution.outcome;
                    match &outcome.termination {
                        Termination::Converged { iter } => println!("converged at iteration {iter}"),
                        Termination::MaxIterations => {
                            println!("not converged after {} iterations", report.solution.config.max_iters)
                        }
                        Termination::Failed { iter, error } => eprintln!("error at iteration {iter}: {error}"),
                    }
                    for f in &report.files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::from(report.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Verify { scope } => {
            let checks = run_scope(scope);
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{c}");
            }
            println!("{} checks, {} failed", checks.len(), failed);
            if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
    }
}
