//! The solution grouped by jump count: term masses are Poisson weights.

use antibody_lab::density::{build_generator, dyson_phillips, evolve, terms_for_tail, total_variation};
use antibody_lab::{DensityVector, Grid, ModelSpec};

fn main() -> antibody_lab::Result<()> {
    let model = ModelSpec::shot_noise(1.0, 1.0, 1.0)?;
    let grid = Grid::new(8.0, 800)?;
    let f0 = DensityVector::uniform(grid, 0.0, 1.0)?;
    let t = 1.0;
    let n = terms_for_tail(model.lambda * t, 1e-3);
    let dp = dyson_phillips(&model, &grid, &f0, t, n)?;
    let mut poisson = (-t * model.lambda).exp();
    for (k, term) in dp.terms.iter().enumerate() {
        if k > 0 {
            poisson *= model.lambda * t / k as f64;
        }
        println!("term {k}: mass {:.6}  Poisson {:.6}", term.total_mass(), poisson);
    }
    println!("dropped mass bound {:.2e}", dp.tail_bound);
    let u = evolve(&build_generator(&model, &grid)?, &f0, t)?;
    println!("L1(partial sum, evolve) = {:.4}", 2.0 * total_variation(&dp.partial_sum, &u)?);
    Ok(())
}
