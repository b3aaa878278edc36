// Monte Carlo size and power of the three tests at a small scale.

use hotelling_rao::matrix::PartitionedSpdMatrix;
use hotelling_rao::power::{power_table, SimConfig};
use hotelling_rao::Result;
use nalgebra::DVector;

pub fn run_example() -> Result<()> {
    let cfg = SimConfig {
        seed: 2024,
        reps: 2_000,
        n: 20,
        alpha: 0.05,
        sigma: PartitionedSpdMatrix::identity(3, 1)?,
        theta_grid: vec![DVector::zeros(3), DVector::from_vec(vec![0.5, 0.0, 0.0]), DVector::from_vec(vec![0.5, 0.5, 0.0])],
    };
    let table = power_table(&cfg)?;
    for c in &table.calibrations {
        println!("{} critical value {:.4}", c.test, c.critical);
    }
    print!("{}", table.to_tsv());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
