//! vec, vech, the duplication matrix and its pseudoinverse.

use gaussian_ngd::kronmat::{duplication, kron, matf, sym, vec, vech};
use nalgebra::DMatrix;

fn main() -> gaussian_ngd::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
    let d = duplication(2)?;
    println!("A = {a}vec(A) = {}vech(A) = {}", vec(&a).transpose(), vech(&a)?.transpose());
    println!("D = {}D+ = {}", d.dup, d.pinv);
    println!("D vech(A) = {}", (&d.dup * vech(&a)?).transpose());
    println!("matf(vech(A)) = {}", matf(&vech(&a)?, 2)?.to_dense());

    let g = DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 0.0, 1.0]);
    println!("sym(G) = {}D D^T vec(G) = {}", sym(&g)?, (&d.dup * d.dup.transpose() * vec(&g)).transpose());

    let aa = kron(&a, &a);
    let lhs = &d.dup * &d.pinv * &aa * &d.dup;
    println!("max |D D+ (A (x) A) D - (A (x) A) D| = {:e}", (lhs - &aa * &d.dup).amax());
    Ok(())
}
