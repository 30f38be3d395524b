//! A problem file written inline, solved through the same driver as the CLI.

use gaussian_ngd::problem::{run, Overrides};

const PROBLEM: &str = r#"
schema = "gaussian-ngd/problem/v1"
name = "quartic_well"
dimension = 2

[initial]
form = "mean_covariance"
mean = [0.5, 0.5]
matrix = [[1.0, 0.0], [0.0, 1.0]]

[rule]
kind = "gauss_hermite"
order = 8

[[factor]]
id = "prior"
indices = [0, 1]
kind = "gaussian_quadratic"
mean = [0.0, 0.0]
precision = [[1.0, 0.0], [0.0, 1.0]]

[[factor]]
id = "well"
indices = [0, 1]
kind = "polynomial"
terms = [
  { coeff = 0.25, powers = [4, 0] },
  { coeff = -1.0, powers = [1, 1] },
  { coeff = -0.5, powers = [1, 0] },
]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("gaussian-ngd-custom-problem");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("quartic_well.problem");
    std::fs::write(&path, PROBLEM)?;
    let report = run(&path, &dir.join("out"), &Overrides::default())?;
    println!("exit code {}", report.exit_code);
    for f in &report.files {
        println!("--- {}\n{}", f.display(), std::fs::read_to_string(f)?);
    }
    Ok(())
}
