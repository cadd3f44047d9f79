//! Invariant density of the discrete generator by inverse iteration.

use nalgebra::{DMatrix, DVector};

use super::generator::{GeneratorMatrix, GeneratorMode};
use super::grid::{total_variation, DensityVector};
use crate::error::{Error, Result};

/// Diagnostics attached to a stationary solve.
#[derive(Debug, Clone)]
pub struct StationaryDensity {
    pub density: DensityVector,
    /// `‖A f*‖₁` in density units.
    pub residual: f64,
    pub iterations: usize,
}

fn iterate(
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    a: &DMatrix<f64>,
    start: DVector<f64>,
    target: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64, usize)> {
    let mut x = start;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = lu
            .solve(&x)
            .ok_or(Error::NonConvergence { iterations: it, residual })?;
        let sum: f64 = y.iter().sum();
        if !sum.is_finite() || sum == 0.0 {
            return Err(Error::NonConvergence { iterations: it, residual });
        }
        x = y / sum;
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = x.iter().sum();
        x /= s;
        residual = (a * &x).iter().map(|v| v.abs()).sum();
        if residual <= target {
            return Ok((x, residual, it));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Normalized nonnegative null vector of the generator.
///
/// Half-line generators are solved on the grid block with the overflow
/// jumps reflected into the last cell; a solution that keeps more than
/// `edge_mass_tol` of its mass in the last tenth of the grid is rejected as
/// a truncation artifact, which is what a sweeping model produces.
pub fn stationary_density(a: &GeneratorMatrix) -> Result<StationaryDensity> {
    let settings = *a.settings();
    let block = a.reflected_block();
    let n = block.n;
    let dense = block.to_dense();
    let mut shifted = dense.clone();
    for i in 0..n {
        shifted[(i, i)] -= settings.stationary_shift;
    }
    let lu = shifted.lu();

    let uniform = DVector::from_element(n, 1.0 / n as f64);
    let (x, residual, iterations) = iterate(
        &lu,
        &dense,
        uniform,
        settings.stationary_residual,
        settings.max_iterations,
    )?;

    // a second start concentrated at the far end detects a degenerate null space
    let mut corner = DVector::zeros(n);
    corner[n - 1] = 1.0;
    let (x2, _, _) = iterate(
        &lu,
        &dense,
        corner,
        settings.stationary_residual,
        settings.max_iterations,
    )?;

    let grid = *a.grid();
    let dx = grid.dx();
    let to_density = |v: &DVector<f64>| {
        DensityVector::from_parts(grid, v.iter().map(|m| m / dx).collect(), 0.0)
    };
    let density = to_density(&x);
    let tv = total_variation(&density, &to_density(&x2))?;
    if tv > 1e-6 {
        return Err(Error::MultipleNullVectors { tv });
    }
    if a.mode() == GeneratorMode::HalfLine {
        let edge_start = n - n.div_ceil(10);
        let edge_mass: f64 = x.iter().skip(edge_start).sum();
        if edge_mass > settings.edge_mass_tol {
            return Err(Error::TruncationEdge { edge_mass });
        }
    }
    Ok(StationaryDensity {
        density,
        residual,
        iterations,
    })
}
