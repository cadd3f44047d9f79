//! One-jump reachable states, the transition lower bound and a minorization certificate.

use antibody_lab::trajectory::{
    reach, reach_dtau, transition_lower_bound, transition_probability, verify_minorization, Interval, Minorization,
};
use antibody_lab::ModelSpec;

fn main() -> antibody_lab::Result<()> {
    let model = ModelSpec::shot_noise(1.0, 1.0, 1.0)?;
    let (x, t) = (1.0, 2.0);
    for tau in [0.0, 0.5, 1.0, 2.0] {
        println!("r({tau}) = {:.4}, ∂r/∂τ = {:.4}", reach(&model, tau, t, x)?, reach_dtau(&model, tau, t, x)?);
    }

    let gamma = Interval::new(0.4, 0.8)?;
    let bound = transition_lower_bound(&model, x, t, gamma)?;
    let (p, se) = transition_probability(&model, x, t, (0.4, 0.8), 100_000, 1)?;
    println!("P(2, 1, [0.4, 0.8]) ≈ {p:.4} ± {se:.4}, one-jump bound {bound:.4}");

    for x0 in [0.5, 1.0, 5.0] {
        match verify_minorization(&model, x0, t, 0.1)? {
            Minorization::Certificate(c) => println!(
                "x0={x0}: Δ = [{:.4}, {:.4}], level {:.4}, δ = {:.3}, τ0 = {:.3}",
                c.delta_interval.lo, c.delta_interval.hi, c.level, c.delta, c.tau0
            ),
            Minorization::Failure { reason } => println!("x0={x0}: no certificate ({reason})"),
        }
    }
    Ok(())
}
