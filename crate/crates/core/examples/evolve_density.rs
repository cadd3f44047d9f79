//! Finite-volume evolution of a density, checked against Monte Carlo.

use antibody_lab::density::{build_generator, evolve_checkpoints, total_variation};
use antibody_lab::trajectory::{ensemble_histogram, InitialDistribution};
use antibody_lab::{DensityVector, Grid, ModelSpec};

fn main() -> antibody_lab::Result<()> {
    let model = ModelSpec::shot_noise(1.0, 1.0, 1.0)?;
    let grid = Grid::new(8.0, 400)?;
    let f0 = DensityVector::uniform(grid, 0.0, 1.0)?;
    let a = build_generator(&model, &grid)?;
    let cfl = a.cfl();
    println!("max |g| = {:.2}, dt limit = {:.2e}", cfl.max_speed, cfl.dt_limit);

    let times = [0.5, 1.0, 2.0, 4.0];
    let snaps = evolve_checkpoints(&a, &f0, &times)?;
    for (t, f) in times.iter().zip(&snaps) {
        println!("t={t}: mass {:.10}, mean {:.4}, escaped {:.2e}", f.total_mass(), f.mean(), f.escaped_mass());
    }

    let init = InitialDistribution::Uniform { a: 0.0, b: 1.0 };
    let mc = ensemble_histogram(&model, &init, 2.0, 200_000, &grid, 3)?;
    println!("TV(evolve, Monte Carlo) at t=2: {:.4}", total_variation(&snaps[2], &mc.density)?);
    Ok(())
}
