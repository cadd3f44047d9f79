use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Uniform partition of `[0, x_max]` into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_max: f64,
    n_cells: usize,
}

impl Grid {
    pub fn new(x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) || n_cells == 0 {
            return Err(Error::InvalidInput(format!(
                "grid needs x_max > 0 and n_cells >= 1, got x_max={x_max}, n_cells={n_cells}"
            )));
        }
        Ok(Self { x_max, n_cells })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.n_cells as f64
    }

    /// Left edge of cell `i`; `left(n_cells)` is `x_max`.
    pub fn left(&self, i: usize) -> f64 {
        if i >= self.n_cells {
            self.x_max
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn right(&self, i: usize) -> f64 {
        self.left(i + 1)
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.left(i) + self.right(i))
    }

    /// Cell containing `y`, clamped to the grid.
    pub fn cell_of(&self, y: f64) -> usize {
        ((y / self.dx()).floor().max(0.0) as usize).min(self.n_cells - 1)
    }
}

/// Piecewise-constant density on a grid plus the mass that left it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    grid: Grid,
    values: Vec<f64>,
    escaped: f64,
}

impl DensityVector {
    pub fn new(grid: Grid, values: Vec<f64>, escaped: f64) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || !(escaped >= 0.0) {
            return Err(Error::InvalidInput("densities must be finite and nonnegative".into()));
        }
        Ok(Self { grid, values, escaped })
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>, escaped: f64) -> Self {
        Self { grid, values, escaped }
    }

    /// Builds a density from cell masses (value = mass / dx).
    pub fn from_masses(grid: Grid, masses: &[f64], escaped: f64) -> Result<Self> {
        let dx = grid.dx();
        Self::new(grid, masses.iter().map(|m| m / dx).collect(), escaped)
    }

    /// Uniform density on `[a, b] ⊂ [0, x_max]`, exact cell averages.
    pub fn uniform(grid: Grid, a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b <= grid.x_max() * (1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "uniform support [{a}, {b}] must lie inside [0, {}]",
                grid.x_max()
            )));
        }
        let dx = grid.dx();
        let values = (0..grid.n_cells())
            .map(|i| {
                let overlap = (grid.right(i).min(b) - grid.left(i).max(a)).max(0.0);
                overlap / (b - a) / dx
            })
            .collect();
        Ok(Self::from_parts(grid, values, 0.0))
    }

    /// Normalized cell averages of a nonnegative function, by 4-point Gauss rule per cell.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let raw: Vec<f64> = (0..grid.n_cells())
            .map(|i| crate::quadrature::gauss(&f, grid.left(i), grid.right(i)) / grid.dx())
            .collect();
        let total: f64 = raw.iter().sum::<f64>() * grid.dx();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("function has no mass on the grid".into()));
        }
        Self::new(grid, raw.into_iter().map(|v| v / total).collect(), 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn escaped_mass(&self) -> f64 {
        self.escaped
    }

    pub fn masses(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.values.iter().map(|v| v * dx).collect()
    }

    pub fn grid_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// Grid mass plus escaped mass.
    pub fn total_mass(&self) -> f64 {
        self.grid_mass() + self.escaped
    }

    /// Mass on `[0, upper]`, splitting the boundary cell linearly.
    pub fn mass_below(&self, upper: f64) -> f64 {
        let dx = self.grid.dx();
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let overlap = (upper.min(self.grid.right(i)) - self.grid.left(i)).clamp(0.0, dx);
                v * overlap
            })
            .sum()
    }

    /// `∫ x^k f(x) dx` over the grid (escaped mass excluded), exact per cell.
    pub fn moment(&self, k: i32) -> f64 {
        let kp = (k + 1) as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (a, b) = (self.grid.left(i), self.grid.right(i));
                v * (b.powi(k + 1) - a.powi(k + 1)) / kp
            })
            .sum()
    }

    /// Mean over the grid part, normalized by grid mass.
    pub fn mean(&self) -> f64 {
        self.moment(1) / self.grid_mass()
    }

    /// `∫ x^{-γ} f(x) dx`, evaluated with cell-center values.
    pub fn negative_moment(&self, gamma: f64) -> f64 {
        let dx = self.grid.dx();
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * dx * self.grid.center(i).powf(-gamma))
            .sum()
    }

    /// `cell_left,cell_right,value` rows; one trailing comment line carries the escaped mass.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cell_left,cell_right,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{:.10e},{:.10e},{:.10e}", self.grid.left(i), self.grid.right(i), v);
        }
        let _ = writeln!(s, "# escaped_mass={:.10e}", self.escaped);
        s
    }
}

/// `½ Σ |f_i - g_i| Δx + ½ |escaped_f - escaped_g|`.
pub fn total_variation(f: &DensityVector, g: &DensityVector) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid, g.grid)));
    }
    let dx = f.grid.dx();
    let body: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * dx;
    Ok(0.5 * body + 0.5 * (f.escaped - g.escaped).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_geometry() {
        let g = Grid::new(8.0, 1000).unwrap();
        assert_relative_eq!(g.dx(), 0.008);
        assert_eq!(g.cell_of(8.0), 999);
        assert_eq!(g.cell_of(-1.0), 0);
        assert_eq!(g.right(999), 8.0);
        assert!(Grid::new(0.0, 3).is_err());
        assert!(Grid::new(1.0, 0).is_err());
    }

    #[test]
    fn uniform_is_exact() {
        let g = Grid::new(8.0, 100).unwrap();
        let f = DensityVector::uniform(g, 0.3, 1.01).unwrap();
        assert_relative_eq!(f.total_mass(), 1.0, epsilon = 1e-14);
        // cell averages smear the endpoints by at most one cell
        assert_relative_eq!(f.mean(), (0.3 + 1.01) / 2.0, epsilon = g.dx());
        assert_relative_eq!(f.mass_below(0.655), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tv_examples() {
        let g = Grid::new(4.0, 40).unwrap();
        let a = DensityVector::uniform(g, 0.0, 1.0).unwrap();
        let b = DensityVector::uniform(g, 2.0, 3.0).unwrap();
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        assert_relative_eq!(total_variation(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
        let other = DensityVector::uniform(Grid::new(4.0, 41).unwrap(), 0.0, 1.0).unwrap();
        assert!(matches!(total_variation(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn rejects_negative() {
        let g = Grid::new(1.0, 2).unwrap();
        assert!(DensityVector::new(g, vec![1.0, -0.1], 0.0).is_err());
        assert!(DensityVector::new(g, vec![1.0], 0.0).is_err());
    }
}
