//! Solves each bundled problem and prints how the run ended.

use gaussian_ngd::problem::{solve, Overrides, Problem, BUNDLED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, _) in BUNDLED {
        let problem = Problem::bundled(name)?;
        let solution = solve(&problem, &Overrides::default())?;
        let out = &solution.outcome;
        let last = out.trace.last().expect("trace has the initial row");
        println!(
            "{name:>16}: {:?} after {} iterations, V = {:.10}, max increase = {:.3e}",
            out.termination,
            out.trace.len() - 1,
            last.value,
            out.trace.max_increase()
        );
        println!("{:>16}  mean = {:.6?}", "", out.estimate.mean().as_slice());
    }
    Ok(())
}
