//! Invariant density of the shot-noise model against its closed-form moments.

use antibody_lab::density::{build_generator, stationary_density};
use antibody_lab::stability::{generator_apply, LyapunovFunction};
use antibody_lab::trajectory::{ergodic_average, Observable};
use antibody_lab::{Grid, ModelSpec};

fn main() -> antibody_lab::Result<()> {
    let (a, l, lam) = (1.0, 1.0, 2.0);
    let model = ModelSpec::shot_noise(a, l, lam)?;
    let grid = Grid::new(16.0, 800)?;
    let s = stationary_density(&build_generator(&model, &grid)?)?;
    println!("residual {:.2e} after {} iterations", s.residual, s.iterations);

    let mean = lam * l / a;
    let second = lam * l * l * (2.0 * lam / a + 1.0) / (2.0 * a);
    println!("mean:          solver {:.5}, exact {mean:.5}", s.density.moment(1));
    println!("second moment: solver {:.5}, exact {second:.5}", s.density.moment(2));

    let e = ergodic_average(&model, 1.0, 100.0, 20_000.0, &Observable::moment(1), 5)?;
    println!("time average of x: {:.4} ± {:.4}", e.value, e.std_error);

    // ℒV vanishes in mean under the invariant law
    let v = LyapunovFunction::Power { gamma: 2.0 };
    let dx = grid.dx();
    let drift: f64 = s
        .density
        .values()
        .iter()
        .enumerate()
        .map(|(i, f)| f * generator_apply(&model, &v, grid.center(i)).unwrap() * dx)
        .sum();
    println!("∫ ℒx² f* dx = {drift:.2e}");
    Ok(())
}
