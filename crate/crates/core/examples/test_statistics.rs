// T², U, W and M on simulated data, and their invariance under the
// block-triangular group.

use hotelling_rao::power::sample_dataset;
use hotelling_rao::stats::{compute_statistics, group_act, invariant_params, GroupElement, SufficientStats};
use hotelling_rao::streams::substream;
use hotelling_rao::matrix::PartitionedSpdMatrix;
use hotelling_rao::Result;
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> Result<()> {
    let sigma = PartitionedSpdMatrix::from_rows(&[&[1.0, 0.3, 0.0], &[0.3, 1.0, 0.2], &[0.0, 0.2, 1.0]], 1)?;
    let theta = DVector::from_vec(vec![0.6, 0.0, 0.0]);
    let params = invariant_params(&theta, &sigma, 20)?;
    println!("delta1 = {:.4}, delta2 = {:.4}", params.delta1, params.delta2);

    let data = sample_dataset(&mut substream(11, 0, 0), 20, &theta, &sigma)?;
    let stats = SufficientStats::from_data(&data, 1)?;
    let t = compute_statistics(&stats)?;
    println!("T2 = {:.4}  U = {:.4}  M = {:.4}  W = {:.4}", t.t2, t.u, t.m, t.w);
    println!("T2 - (U + M) = {:.1e}", t.t2 - t.u - t.m);

    let g = GroupElement::new(
        DMatrix::from_element(1, 1, -2.0),
        DMatrix::from_row_slice(1, 2, &[0.7, -1.1]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.0, 3.0]),
    )?;
    let moved = compute_statistics(&group_act(&g, &stats)?)?;
    println!("after (X, S) -> (gX, gSg'): U = {:.4}, M = {:.4}", moved.u, moved.m);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
