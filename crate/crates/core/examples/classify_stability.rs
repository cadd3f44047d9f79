//! Drift conditions and the combined stable/sweeping verdict.

use antibody_lab::stability::{
    check_drift, classify_power_law, drift_samples, foguel_verdict, LyapunovFunction, DEFAULT_TOL,
};
use antibody_lab::ModelSpec;

fn main() -> antibody_lab::Result<()> {
    let models = [
        ("g=-x, Q=x+1", ModelSpec::shot_noise(1.0, 1.0, 1.0)?),
        ("g=-0.5x, Q=2x+0.1", ModelSpec::affine(0.5, 2.0, 0.1, 1.0)?),
        ("g=-x, Q=2x+0.1", ModelSpec::affine(1.0, 2.0, 0.1, 1.0)?),
    ];
    for (name, model) in &models {
        let drift = check_drift(model, &LyapunovFunction::Identity, 2.0, &drift_samples(2.0, 1e4))?;
        println!("{name}: V=x drift {:?} (ε = {:.3})", drift.status, drift.epsilon);
        let v = foguel_verdict(model)?;
        println!("  verdict {}", v.verdict);
        for e in &v.evidence {
            println!("    {}", serde_json::to_string(e).unwrap_or_default().chars().take(120).collect::<String>());
        }
    }
    let c = classify_power_law(1.0, 2.0, 1.0, DEFAULT_TOL)?;
    println!("a=1, b=2, Λ=1: {} with γ* = {:.4}", c.verdict, c.gamma_witness.unwrap_or(f64::NAN));
    Ok(())
}
