use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::commands::{Outcome, Sink};
use super::config::{as_config, RunConfig, VerifyConfig};
use crate::density::{dyson_phillips, resolvent_a0, resolvent_identity_error, DensityVector, Grid};
use crate::error::Result;
use crate::model::ModelSpec;
use crate::trajectory::{
    path_rng, reach, reach_dtau, transition_lower_bound, transition_probability, verify_minorization, Interval,
    Minorization,
};

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    /// The formula being checked.
    pub anchor: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl VerifyCheck {
    fn at_most(name: &str, anchor: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail,
        }
    }

    /// Passes when `margin >= 0`.
    fn margin(name: &str, anchor: &str, margin: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            measured: margin,
            tolerance: 0.0,
            passed: margin >= 0.0,
            detail,
        }
    }
}

const JACOBIAN: &str = "∂(π_t x)/∂x = g(π_t x)/g(x)";
const DTAU: &str = "∂r/∂τ = g(r) - g(r)/g(Q(z)) Q'(z) g(z), z = π_(t-τ) x";
const MINOR: &str = "P(t, x, ·) ≥ η 1_Δ for x near x0, |Δ| ≥ δτ0/3";
const LOWER: &str = "P(t, x, Γ) ≥ Λ e^(-Λt) |{τ : r(τ, t, x) ∈ Γ}|";
const DYSON: &str = "mass of term n = e^(-Λt) (Λt)^n / n!";
const RESOLVENT: &str = "(λ - A0) R(λ, A0) f = f";

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Runs the formula battery: flow Jacobian, `∂r/∂τ`, minorization, the one-jump
/// lower bound, Dyson–Phillips term masses and the resolvent identity.
pub fn run_verification(
    model: &ModelSpec,
    grid: &Grid,
    f0: &DensityVector,
    bounded: &ModelSpec,
    settings: &VerifyConfig,
) -> Result<Vec<VerifyCheck>> {
    let upper = model.phase_space().upper().unwrap_or(10.0);
    let mut checks = Vec::new();

    // flow Jacobian against central differences
    let corrupt = if settings.corrupt_jacobian { 1.0 + 1e-3 } else { 1.0 };
    let mut worst = 0.0f64;
    for &x in &linspace(0.05 * upper, 0.5 * upper, 10) {
        for &t in &linspace(0.1, 2.0, 10) {
            let h = 1e-4 * x;
            let fd = (model.flow.advance(x + h, t)? - model.flow.advance(x - h, t)?) / (2.0 * h);
            let j = model.flow.flow_jacobian(x, t)? * corrupt;
            worst = worst.max((fd - j).abs() / j.abs());
        }
    }
    checks.push(VerifyCheck::at_most("flow_jacobian", JACOBIAN, worst, 1e-5, "10×10 grid of (x, t)".into()));

    // ∂r/∂τ against central differences
    let mut rng = path_rng(settings.seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..settings.n_samples {
        let t = rng.random_range(0.1..5.0);
        let h = 1e-4 * t;
        let tau = rng.random_range(h..t - h);
        let x = rng.random_range(0.05 * upper..0.5 * upper);
        let fd = (reach(model, tau + h, t, x)? - reach(model, tau - h, t, x)?) / (2.0 * h);
        let d = reach_dtau(model, tau, t, x)?;
        worst = worst.max((fd - d).abs() / d.abs().max(1e-8));
    }
    checks.push(VerifyCheck::at_most(
        "reach_dtau",
        DTAU,
        worst,
        1e-5,
        format!("{} random (τ, t, x)", settings.n_samples),
    ));

    // minorization certificates, checked by Monte Carlo at the ball's ends and center
    let (t, radius) = (settings.minorization_t, settings.minorization_radius);
    for (k, &x0) in settings.minorization_x0.iter().enumerate() {
        let name = format!("minorization_x0={x0}");
        match verify_minorization(model, x0, t, radius)? {
            Minorization::Certificate(c) => {
                let d = c.delta_interval;
                let target = c.level * d.len();
                let mut margin = d.len() - c.delta * c.tau0 / 3.0;
                for (j, x) in [x0 - radius, x0, x0 + radius].into_iter().enumerate() {
                    let seed = settings.seed.wrapping_add(100 + 3 * k as u64 + j as u64);
                    let (p, se) = transition_probability(model, x, t, (d.lo, d.hi), settings.n_paths, seed)?;
                    margin = margin.min(p + 3.0 * se - target);
                }
                checks.push(VerifyCheck::margin(
                    &name,
                    MINOR,
                    margin,
                    format!("Δ=[{:.6}, {:.6}], level {:.4e}", d.lo, d.hi, c.level),
                ));
            }
            Minorization::Failure { reason } => checks.push(VerifyCheck::margin(&name, MINOR, -1.0, reason)),
        }
    }

    // one-jump lower bound below Monte Carlo
    let mut margin = f64::INFINITY;
    for k in 0..settings.transition_cases {
        let x = rng.random_range(0.02 * upper..0.3 * upper);
        let t = rng.random_range(0.5..3.0);
        let lo = rng.random_range(0.0..0.2 * upper);
        let hi = lo + rng.random_range(0.01 * upper..0.1 * upper);
        let bound = transition_lower_bound(model, x, t, Interval::new(lo, hi)?)?;
        let (p, se) = transition_probability(model, x, t, (lo, hi), settings.n_paths, settings.seed + 1000 + k as u64)?;
        margin = margin.min(p + 3.0 * se - bound);
    }
    checks.push(VerifyCheck::margin(
        "transition_lower_bound",
        LOWER,
        margin,
        format!("{} random (x, t, Γ), {} paths each", settings.transition_cases, settings.n_paths),
    ));

    // Dyson–Phillips term masses
    let mut worst = 0.0f64;
    for &lt in &settings.dyson_lambda_t {
        let dp = dyson_phillips(model, grid, f0, lt / model.lambda, 5)?;
        let mut poisson = (-lt).exp();
        for (n, term) in dp.terms.iter().enumerate() {
            if n > 0 {
                poisson *= lt / n as f64;
            }
            worst = worst.max((term.total_mass() - poisson).abs());
        }
    }
    checks.push(VerifyCheck::at_most("dyson_phillips_masses", DYSON, worst, 1e-4, "n ≤ 5".into()));

    // resolvent identity on a plateau model
    let target = if model.boost.plateau_bounds().is_some() { model } else { bounded };
    let m = target.phase_space().upper().unwrap_or(10.0);
    let rgrid = Grid::new(m, settings.resolvent_cells)?;
    let f = DensityVector::from_fn(rgrid, |x| (std::f64::consts::PI * x / m).sin().powi(2))?;
    let mut worst = 0.0f64;
    let mut negative = false;
    for &lam in &settings.resolvent_lambdas {
        let r = resolvent_a0(target, &rgrid, lam, &f)?;
        negative |= r.values.iter().any(|v| *v < 0.0);
        worst = worst.max(resolvent_identity_error(target, lam, &f, &r)?);
    }
    let n = settings.resolvent_cells as f64;
    let mut check = VerifyCheck::at_most(
        "resolvent_identity",
        RESOLVENT,
        worst,
        5.0 / n,
        format!("L1 error, {} cells, f ∝ sin²(πx/M)", settings.resolvent_cells),
    );
    if negative {
        check.passed = false;
        check.detail.push_str("; negative resolvent values");
    }
    checks.push(check);
    Ok(checks)
}

pub(super) fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let grid = cfg.grid(&model)?;
    let f0 = cfg.sim.initial.to_density(&grid).map_err(as_config)?;
    let bounded = cfg.verify.bounded_model.build().map_err(as_config)?;
    let checks = run_verification(&model, &grid, &f0, &bounded, &cfg.verify)?;
    let mut sink = Sink::new(cfg)?;
    let mut body = String::from("check,anchor,measured,tolerance,passed,detail\n");
    for c in &checks {
        let _ = writeln!(
            body,
            "{},\"{}\",{:.6e},{:.6e},{},\"{}\"",
            c.name, c.anchor, c.measured, c.tolerance, c.passed, c.detail
        );
        println!(
            "{} {:<28} {:.3e} (tol {:.1e})  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            c.anchor
        );
    }
    sink.csv("verify_report.csv", &body)?;
    let passed = checks.iter().all(|c| c.passed);
    sink.json("verify_report.json", json!({ "passed": passed, "checks": checks }))?;
    Ok(sink.finish(passed))
}
