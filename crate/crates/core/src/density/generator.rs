//! Finite-volume discretization of `A = -(g f)' + Λ P_Q - Λ I`.
//!
//! The state is the vector of cell masses, with one extra absorbing slot for
//! mass mapped beyond `x_max` on half-line grids. Entry `(j, i)` is the rate
//! at which mass moves from slot `i` to slot `j`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, PhaseSpace};

/// Tunable tolerances of the density solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Courant number for the transport part.
    pub cfl_safety: f64,
    /// Cap on `Λ dt`.
    pub jump_cap: f64,
    /// Allowed drift of total mass during `evolve`.
    pub mass_tol: f64,
    /// Target `‖A f‖₁` for the stationary solve.
    pub stationary_residual: f64,
    /// Shift used by inverse iteration.
    pub stationary_shift: f64,
    pub max_iterations: usize,
    /// Stationary mass allowed in the last tenth of a half-line grid.
    pub edge_mass_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            cfl_safety: 0.5,
            jump_cap: 0.5,
            mass_tol: 1e-8,
            stationary_residual: 1e-10,
            stationary_shift: -1e-8,
            max_iterations: 50,
            edge_mass_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    HalfLine,
    BoundedB,
    BoundedBPrime,
}

/// Time-step limits of the explicit stepper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflInfo {
    /// `max |g|` over cell interfaces.
    pub max_speed: f64,
    pub dt_limit: f64,
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Csr {
    pub n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Sums duplicate `(row, col)` entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&k| self.cols[k] == c)
            .map_or(0.0, |k| self.vals[k])
    }

    /// Column sums, i.e. `1ᵀ A`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for (_, c, v) in self.entries() {
            s[c] += v;
        }
        s
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Discrete generator on a grid.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub(crate) matrix: Csr,
    pub(crate) grid: Grid,
    mode: GeneratorMode,
    lambda: f64,
    cfl: CflInfo,
    settings: SolverSettings,
}

/// Transport part: mass in cell `i` leaves through its left interface at rate `|g(x_i)| / Δx`.
pub(crate) fn transport_triplets(model: &ModelSpec, grid: &Grid) -> (Vec<(usize, usize, f64)>, f64) {
    let n = grid.n_cells();
    let dx = grid.dx();
    let mut t = Vec::with_capacity(2 * n);
    let mut max_speed: f64 = 0.0;
    for i in 1..n {
        let speed = (-model.flow.g(grid.left(i))).max(0.0);
        max_speed = max_speed.max(speed);
        let rate = speed / dx;
        if rate > 0.0 {
            t.push((i, i, -rate));
            t.push((i - 1, i, rate));
        }
    }
    max_speed = max_speed.max((-model.flow.g(grid.x_max())).max(0.0));
    (t, max_speed)
}

/// Builds the discrete generator of the density semigroup.
pub fn build_generator(model: &ModelSpec, grid: &Grid) -> Result<GeneratorMatrix> {
    build_generator_with(model, grid, SolverSettings::default())
}

pub fn build_generator_with(
    model: &ModelSpec,
    grid: &Grid,
    settings: SolverSettings,
) -> Result<GeneratorMatrix> {
    let mode = match (model.phase_space(), model.boost.plateau_bounds()) {
        (PhaseSpace::HalfLine, _) => GeneratorMode::HalfLine,
        (PhaseSpace::Interval { .. }, None) => GeneratorMode::BoundedB,
        (PhaseSpace::Interval { .. }, Some(_)) => GeneratorMode::BoundedBPrime,
    };
    let n = grid.n_cells();
    let size = if mode == GeneratorMode::HalfLine { n + 1 } else { n };
    let fp = model.boost.build_fp_matrix(grid)?;
    let (mut triplets, max_speed) = transport_triplets(model, grid);
    let lam = model.lambda;
    for i in 0..n {
        triplets.push((i, i, -lam));
        for &(j, w) in fp.row(i) {
            triplets.push((j, i, lam * w));
        }
        let over = fp.overflow(i);
        if over > 0.0 {
            triplets.push((n, i, lam * over));
        }
    }
    let matrix = Csr::from_triplets(size, triplets);
    let mut dt_limit = settings.jump_cap / lam;
    if max_speed > 0.0 {
        dt_limit = dt_limit.min(settings.cfl_safety * grid.dx() / max_speed);
    }
    Ok(GeneratorMatrix {
        matrix,
        grid: *grid,
        mode,
        lambda: lam,
        cfl: CflInfo { max_speed, dt_limit },
        settings,
    })
}

impl GeneratorMatrix {
    pub fn mode(&self) -> GeneratorMode {
        self.mode
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cfl(&self) -> CflInfo {
        self.cfl
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn size(&self) -> usize {
        self.matrix.n
    }

    /// Entry `(to, from)`.
    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.matrix.get(to, from)
    }

    /// `1ᵀ A`: zero in bounded modes, and zero including the overflow slot on half-lines.
    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_sums()
    }

    /// Applies `A` to a density (and escaped mass), returning `A f` in density units.
    pub fn apply(&self, f: &super::DensityVector) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut u = f.masses();
        if self.mode == GeneratorMode::HalfLine {
            u.push(f.escaped_mass());
        }
        let mut out = vec![0.0; self.size()];
        self.matrix.matvec(&u, &mut out);
        out.truncate(self.grid.n_cells());
        out.iter().map(|v| v / dx).collect()
    }

    /// Sparse triplets `row,col,value` (row = destination).
    pub fn to_triplet_csv(&self) -> String {
        let mut s = String::from("row,col,value\n");
        for (r, c, v) in self.matrix.entries() {
            let _ = writeln!(s, "{r},{c},{v:e}");
        }
        s
    }

    /// The grid block with overflow rerouted into the last cell.
    pub(crate) fn reflected_block(&self) -> Csr {
        let n = self.grid.n_cells();
        if self.mode != GeneratorMode::HalfLine {
            return self.matrix.clone();
        }
        let triplets = self
            .matrix
            .entries()
            .filter(|&(_, c, _)| c < n)
            .map(|(r, c, v)| (r.min(n - 1), c, v))
            .collect();
        Csr::from_triplets(n, triplets)
    }

    pub(crate) fn check_dt(&self, dt: f64) -> Result<()> {
        if dt > self.cfl.dt_limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation {
                dt,
                limit: self.cfl.dt_limit,
            });
        }
        Ok(())
    }
}
