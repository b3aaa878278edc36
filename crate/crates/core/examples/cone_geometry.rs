// Exit radii of the T² and U acceptance regions, dual-cone membership and
// the half-space probe.

use hotelling_rao::cone::{
    dual_cone_membership, exit_radius_sweep, half_space_probe, null_subspace_sweep, random_probe_matrix, HalfSpaceSpec,
    HalfSpaceVariant,
};
use hotelling_rao::matrix::PartitionedSpdMatrix;
use hotelling_rao::stats::Region;
use hotelling_rao::Result;
use nalgebra::DVector;

pub fn run_example() -> Result<()> {
    let s = random_probe_matrix(7, 4, 2)?;
    for region in [Region::T2, Region::U] {
        let radii: Vec<f64> = exit_radius_sweep(region, &s, 20, 3.0, 200, 7)?.iter().map(|p| p.exit_radius.value()).collect();
        let max = radii.iter().cloned().fold(0.0, f64::max);
        println!("{}: largest exit radius over 200 random rays = {max:.4}", region.name());
    }
    for probe in null_subspace_sweep(Region::U, &s, 20, 3.0, 3, 7)? {
        println!("{}", probe.to_json_line());
    }

    let sigma = PartitionedSpdMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]], 1)?;
    for w in [[1.0, 1.0], [1.0, 0.0], [-3.0, -3.0]] {
        let member = dual_cone_membership(&DVector::from_row_slice(&w), &sigma, 32, 1)?;
        println!("w = {w:?}: in dual cone = {member}");
    }

    let spec = HalfSpaceSpec {
        theta: DVector::from_vec(vec![0.5, 0.0, 0.0]),
        sigma: PartitionedSpdMatrix::identity(3, 1)?,
        c: -14.0,
        variant: HalfSpaceVariant::HA,
    };
    println!("{:?}", half_space_probe(&spec, 20, 5.5, 1_000, 3)?);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
