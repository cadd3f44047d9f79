//! Method-of-lines time stepping of `u' = A u` with classical RK4.
//!
//! With `dt ≤ cfl_safety·Δx/max|g|` and `Λ dt ≤ jump_cap` (both 0.5 by
//! default) every diagonal entry satisfies `dt |A_ii| ≤ 1`, which keeps the
//! RK4 stability polynomial nonnegative on the Metzler generator.

use super::generator::{GeneratorMatrix, GeneratorMode};
use super::grid::DensityVector;
use crate::error::{Error, Result};

const CLIP: f64 = 1e-12;

struct Stepper<'a> {
    a: &'a GeneratorMatrix,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(a: &'a GeneratorMatrix) -> Self {
        let n = a.size();
        Self {
            a,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, u: &mut [f64], dt: f64) {
        let m = &self.a.matrix;
        let [k1, k2, k3, k4] = &mut self.k;
        m.matvec(u, k1);
        for (t, (x, d)) in self.tmp.iter_mut().zip(u.iter().zip(k1.iter())) {
            *t = x + 0.5 * dt * d;
        }
        m.matvec(&self.tmp, k2);
        for (t, (x, d)) in self.tmp.iter_mut().zip(u.iter().zip(k2.iter())) {
            *t = x + 0.5 * dt * d;
        }
        m.matvec(&self.tmp, k3);
        for (t, (x, d)) in self.tmp.iter_mut().zip(u.iter().zip(k3.iter())) {
            *t = x + dt * d;
        }
        m.matvec(&self.tmp, k4);
        for i in 0..u.len() {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Clips round-off undershoot and restores the mass it removed.
fn clip(u: &mut [f64]) -> Result<()> {
    let mut removed = 0.0;
    for (cell, v) in u.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -CLIP {
                return Err(Error::NegativeUndershoot { value: *v, cell });
            }
            removed += *v;
            *v = 0.0;
        }
    }
    if removed < 0.0 {
        let positive: f64 = u.iter().sum();
        if positive > 0.0 {
            let scale = (positive + removed) / positive;
            u.iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok(())
}

fn to_state(a: &GeneratorMatrix, f: &DensityVector) -> Result<Vec<f64>> {
    if f.grid() != a.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid(), a.grid())));
    }
    let mut u = f.masses();
    if a.mode() == GeneratorMode::HalfLine {
        u.push(f.escaped_mass());
    } else if f.escaped_mass() > 0.0 {
        return Err(Error::InvalidInput("bounded densities cannot carry escaped mass".into()));
    }
    Ok(u)
}

fn from_state(a: &GeneratorMatrix, u: &[f64]) -> DensityVector {
    let n = a.grid().n_cells();
    let dx = a.grid().dx();
    let values = u[..n].iter().map(|m| m / dx).collect();
    let escaped = if u.len() > n { u[n] } else { 0.0 };
    DensityVector::from_parts(*a.grid(), values, escaped)
}

fn advance_state(a: &GeneratorMatrix, u: &mut [f64], t: f64, stepper: &mut Stepper) -> Result<()> {
    if t == 0.0 {
        return Ok(());
    }
    let steps = (t / a.cfl().dt_limit - 1e-9).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    a.check_dt(dt)?;
    let mass0: f64 = u.iter().sum();
    let tol = a.settings().mass_tol;
    for _ in 0..steps {
        stepper.step(u, dt);
        clip(u)?;
    }
    let drift = (u.iter().sum::<f64>() - mass0).abs();
    if drift > tol {
        return Err(Error::MassDrift { drift, tol });
    }
    Ok(())
}

/// Density at time `t` from `f0`.
pub fn evolve(a: &GeneratorMatrix, f0: &DensityVector, t: f64) -> Result<DensityVector> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be finite and >= 0, got {t}")));
    }
    let mut u = to_state(a, f0)?;
    let mut stepper = Stepper::new(a);
    advance_state(a, &mut u, t, &mut stepper)?;
    Ok(from_state(a, &u))
}

/// Densities at each of the increasing `times`, reusing one integration.
pub fn evolve_checkpoints(
    a: &GeneratorMatrix,
    f0: &DensityVector,
    times: &[f64],
) -> Result<Vec<DensityVector>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidInput("checkpoints must be nonnegative and increasing".into()));
    }
    let mut u = to_state(a, f0)?;
    let mut stepper = Stepper::new(a);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        advance_state(a, &mut u, t - now, &mut stepper)?;
        now = t;
        out.push(from_state(a, &u));
    }
    Ok(out)
}
