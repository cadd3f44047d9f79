//! Exact event-driven paths of the shot-noise model and an ensemble histogram.

use antibody_lab::trajectory::{ensemble_histogram, jump_counts, simulate_trajectory, InitialDistribution};
use antibody_lab::{Grid, ModelSpec};

fn main() -> antibody_lab::Result<()> {
    let model = ModelSpec::shot_noise(1.0, 1.0, 1.0)?;

    let path = simulate_trajectory(&model, 0.5, 10.0, 42)?;
    println!("one path on [0, 10]: {} jumps", path.n_jumps());
    for t in [0.0, 2.5, 5.0, 7.5, 10.0] {
        println!("  x({t:>4}) = {:.4}", path.sample_at(&model, t)?);
    }

    let counts = jump_counts(&model, 0.5, 10.0, 10_000, 7)?;
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    println!("mean jump count over 10k paths: {mean:.3} (Λt = 10)");

    let grid = Grid::new(8.0, 16)?;
    let init = InitialDistribution::Uniform { a: 0.0, b: 1.0 };
    let hist = ensemble_histogram(&model, &init, 2.0, 100_000, &grid, 1)?;
    println!("histogram of ξ_2 from uniform[0, 1]:");
    for (i, (v, se)) in hist.density.values().iter().zip(&hist.std_errors).enumerate() {
        println!("  [{:.1}, {:.1})  {v:.4} ± {se:.4}", grid.left(i), grid.right(i));
    }
    Ok(())
}
