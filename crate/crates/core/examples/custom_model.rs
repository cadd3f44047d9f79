//! Models built from expressions, with sampled assumption checks.

use antibody_lab::density::{build_generator, stationary_density};
use antibody_lab::{AssumptionProfile, BoostFamily, BoostMap, Expr, FlowModel, Grid, ModelSpec, PieceSpec};

fn main() -> antibody_lab::Result<()> {
    let flow = FlowModel::custom("-x/(1 + 0.1*x) - 0.2*x^2")?;
    for c in &flow.validate().checks {
        println!("flow {:<24} {}", c.name, if c.passed { "ok" } else { "FAILED" });
    }
    let boost = BoostMap::new(
        BoostFamily::CustomMonotonePieces {
            pieces: vec![
                PieceSpec { a: 0.0, b: Some(2.0), branch: Expr::parse("x + 1")? },
                PieceSpec { a: 2.0, b: None, branch: Expr::parse("1.5*x")? },
            ],
        },
        AssumptionProfile::A,
    )?;
    let model = ModelSpec::new(flow, boost, 1.5)?;
    model.validate()?;

    let grid = Grid::new(20.0, 400)?;
    let s = stationary_density(&build_generator(&model, &grid)?)?;
    println!("stationary mean {:.4}, P(x > 5) = {:.4}", s.density.moment(1), 1.0 - s.density.mass_below(5.0));
    Ok(())
}
