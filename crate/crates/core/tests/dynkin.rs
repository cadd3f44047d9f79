//! `ℒV(x0)` against the Monte Carlo slope of `E V(ξ_h)` at `h → 0`.

use antibody_lab::stability::{generator_apply, LyapunovFunction};
use antibody_lab::trajectory::{ensemble_states, InitialDistribution};
use antibody_lab::ModelSpec;

fn dynkin_z(model: &ModelSpec, v: &LyapunovFunction, x0: f64, h: f64, seed: u64) -> f64 {
    let init = InitialDistribution::PointMass { x: x0 };
    let n = 1_000_000;
    let vals: Vec<f64> = ensemble_states(model, &init, h, n, seed)
        .unwrap()
        .into_iter()
        .map(|x| (v.value(x) - v.value(x0)) / h)
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    (mean - generator_apply(model, v, x0).unwrap()) / se
}

#[test]
fn shot_noise_second_moment() {
    let m = ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap();
    let z = dynkin_z(&m, &LyapunovFunction::Power { gamma: 2.0 }, 2.0, 0.01, 3);
    assert!(z.abs() < 3.0, "{z}");
}

#[test]
fn affine_sublinear_power() {
    let m = ModelSpec::affine(0.5, 2.0, 0.1, 1.0).unwrap();
    let z = dynkin_z(&m, &LyapunovFunction::Power { gamma: 0.5 }, 1.5, 0.01, 4);
    assert!(z.abs() < 3.0, "{z}");
}
