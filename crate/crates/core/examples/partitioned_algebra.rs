// Schur complements, the rank-p₁ matrix B⁺(S) and its Moore-Penrose inverse.

use hotelling_rao::matrix::{
    b_mp, b_plus, b_plus_block_form, numerical_rank, penrose_residuals, schur_complement, simultaneous_diagonalize,
    PartitionedSpdMatrix,
};
use hotelling_rao::Result;
use nalgebra::DVector;

pub fn run_example() -> Result<()> {
    let s = PartitionedSpdMatrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]], 1)?;
    println!("S11:2 = {}", schur_complement(&s)?);

    let bp = b_plus(&s)?;
    let gap = (&bp - b_plus_block_form(&s)?).abs().max();
    println!("B+(S) = {bp}rank {} (p1 = {}), factored vs block form differ by {gap:.1e}", numerical_rank(&bp), s.split());

    let b = b_mp(&s)?;
    let r = penrose_residuals(&bp, &b);
    println!("Penrose residuals: AGA {:.1e}, GAG {:.1e}, AG' {:.1e}, GA' {:.1e}", r.aga, r.gag, r.ag_symmetric, r.ga_symmetric);

    // Two p.s.d. matrices with the same column space share a congruence.
    let v = DVector::from_vec(vec![1.0, -0.5, 0.25]);
    let a1 = &v * v.transpose();
    let a2 = &a1 * 3.0;
    let sd = simultaneous_diagonalize(&a1, &a2)?;
    println!("shared rank {}, generalized eigenvalues {:?}", sd.rank, sd.d.as_slice());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
