//! Closed-form resolvent of the plateau transport generator.

use antibody_lab::density::{resolvent_a0, resolvent_identity_error};
use antibody_lab::{BoostMap, DensityVector, FlowModel, Grid, ModelSpec, PhaseSpace};

fn main() -> antibody_lab::Result<()> {
    let m = 10.0;
    let model = ModelSpec::new(
        FlowModel::linear(1.0).with_domain(PhaseSpace::Interval { m }),
        BoostMap::plateau(6.0, m, "(x + 10)/2")?,
        1.0,
    )?;
    for n in [100, 200, 400, 800] {
        let grid = Grid::new(m, n)?;
        let f = DensityVector::from_fn(grid, |x| (std::f64::consts::PI * x / m).sin().powi(2))?;
        let r = resolvent_a0(&model, &grid, 1.0, &f)?;
        let err = resolvent_identity_error(&model, 1.0, &f, &r)?;
        println!(
            "n={n:>4}: mass {:.5}, plateau mass {:.5}, identity error {err:.2e} (n·err = {:.2})",
            r.mass(),
            r.boundary_mass,
            err * n as f64
        );
    }
    Ok(())
}
