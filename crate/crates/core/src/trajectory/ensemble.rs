//! Monte Carlo estimators built on independent per-path RNG streams.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{check_start, jump_law, path_rng, simulate_with, state_at, TrajectoryPath};
use crate::density::{DensityVector, Grid};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flow::FlowFamily;
use crate::model::ModelSpec;
use crate::quadrature::gauss8;

/// Law of the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDistribution {
    PointMass { x: f64 },
    Uniform { a: f64, b: f64 },
    /// Piecewise-constant density; escaped mass is ignored.
    #[serde(skip)]
    Grid(DensityVector),
}

enum Sampler<'a> {
    Point(f64),
    Uniform(f64, f64),
    Cells(&'a Grid, WeightedIndex<f64>),
}

impl InitialDistribution {
    fn sampler(&self, model: &ModelSpec) -> Result<Sampler<'_>> {
        match self {
            InitialDistribution::PointMass { x } => {
                check_start(model, *x)?;
                Ok(Sampler::Point(*x))
            }
            InitialDistribution::Uniform { a, b } => {
                if !(a < b) {
                    return Err(Error::InvalidInput(format!("uniform needs a < b, got [{a}, {b}]")));
                }
                check_start(model, *a)?;
                check_start(model, *b)?;
                Ok(Sampler::Uniform(*a, *b))
            }
            InitialDistribution::Grid(f) => {
                if let Some(m) = model.phase_space().upper() {
                    if f.grid().x_max() > m * (1.0 + 1e-12) {
                        return Err(Error::InvalidInput("initial density extends past M".into()));
                    }
                }
                let w = WeightedIndex::new(f.values().iter().copied())
                    .map_err(|e| Error::InvalidInput(format!("initial density: {e}")))?;
                Ok(Sampler::Cells(f.grid(), w))
            }
        }
    }

    /// The law as a piecewise-constant density on `grid`; a point mass fills its cell.
    pub fn to_density(&self, grid: &Grid) -> Result<DensityVector> {
        match self {
            InitialDistribution::PointMass { x } => {
                if !(*x >= 0.0 && *x <= grid.x_max()) {
                    return Err(Error::InvalidInput(format!("point mass at {x} lies off the grid")));
                }
                let mut masses = vec![0.0; grid.n_cells()];
                masses[grid.cell_of(*x).min(grid.n_cells() - 1)] = 1.0;
                DensityVector::from_masses(*grid, &masses, 0.0)
            }
            InitialDistribution::Uniform { a, b } => DensityVector::uniform(*grid, *a, *b),
            InitialDistribution::Grid(f) => {
                if f.grid() != grid {
                    return Err(Error::GridMismatch(format!("{:?} vs {grid:?}", f.grid())));
                }
                Ok(f.clone())
            }
        }
    }

    /// Support `[α, β]`, used to reject laws charging a neighbourhood of 0.
    fn support(&self) -> (f64, f64) {
        match self {
            InitialDistribution::PointMass { x } => (*x, *x),
            InitialDistribution::Uniform { a, b } => (*a, *b),
            InitialDistribution::Grid(f) => {
                let g = f.grid();
                let first = f.values().iter().position(|v| *v > 0.0).unwrap_or(0);
                let last = f.values().iter().rposition(|v| *v > 0.0).unwrap_or(0);
                (g.left(first), g.right(last))
            }
        }
    }
}

impl Sampler<'_> {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Point(x) => *x,
            Sampler::Uniform(a, b) => rng.random_range(*a..*b),
            Sampler::Cells(grid, w) => {
                let i = rng.sample(w);
                rng.random_range(grid.left(i)..grid.right(i))
            }
        }
    }
}

/// Histogram of `ξ_t` with per-cell standard errors.
#[derive(Debug, Clone)]
pub struct HistogramEstimate {
    /// Normalized by the path count; `escaped_mass` holds the out-of-grid fraction.
    pub density: DensityVector,
    pub std_errors: Vec<f64>,
    pub out_of_grid: f64,
    pub n_paths: usize,
}

impl HistogramEstimate {
    /// `cell_left,cell_right,density,std_error` rows.
    pub fn to_csv(&self) -> String {
        let grid = self.density.grid();
        let mut s = String::from("cell_left,cell_right,density,std_error\n");
        for (i, (v, e)) in self.density.values().iter().zip(&self.std_errors).enumerate() {
            let _ = writeln!(s, "{:.10e},{:.10e},{:.10e},{:.10e}", grid.left(i), grid.right(i), v, e);
        }
        s
    }
}

/// Final states of `n_paths` independent paths; deterministic for a given seed.
pub fn ensemble_states(
    model: &ModelSpec,
    init: &InitialDistribution,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) || n_paths == 0 {
        return Err(Error::InvalidInput(format!("need t >= 0 and n_paths >= 1, got t={t}, n={n_paths}")));
    }
    let sampler = init.sampler(model)?;
    let law = jump_law(model);
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let x0 = sampler.draw(&mut rng);
            state_at(model, x0, t, law, &mut rng)
        })
        .collect())
}

/// Full skeletons of the first paths of an ensemble; path `i` ends where
/// `ensemble_states` puts path `i` at `t_end`.
pub fn simulate_paths(
    model: &ModelSpec,
    init: &InitialDistribution,
    t_end: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<TrajectoryPath>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be > 0, got {t_end}")));
    }
    let sampler = init.sampler(model)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let x0 = sampler.draw(&mut rng);
            simulate_with(model, x0, t_end, seed, &mut rng)
        })
        .collect())
}

pub fn ensemble_histogram(
    model: &ModelSpec,
    init: &InitialDistribution,
    t: f64,
    n_paths: usize,
    grid: &Grid,
    seed: u64,
) -> Result<HistogramEstimate> {
    let states = ensemble_states(model, init, t, n_paths, seed)?;
    Ok(histogram(&states, grid))
}

pub(crate) fn histogram(states: &[f64], grid: &Grid) -> HistogramEstimate {
    let n = grid.n_cells();
    let mut counts = vec![0u64; n];
    let mut outside = 0u64;
    for &x in states {
        if x >= 0.0 && x < grid.x_max() {
            counts[grid.cell_of(x)] += 1;
        } else if x == grid.x_max() {
            counts[n - 1] += 1;
        } else {
            outside += 1;
        }
    }
    let total = states.len() as f64;
    let dx = grid.dx();
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let std_errors = p.iter().map(|p| (p * (1.0 - p) / total).sqrt() / dx).collect();
    let out_of_grid = outside as f64 / total;
    HistogramEstimate {
        density: DensityVector::from_parts(*grid, p.iter().map(|p| p / dx).collect(), out_of_grid),
        std_errors,
        out_of_grid,
        n_paths: states.len(),
    }
}

/// Estimate of `P(ξ_t ∈ [lo, hi])` from a fixed start, with its standard error.
pub fn transition_probability(
    model: &ModelSpec,
    x: f64,
    t: f64,
    interval: (f64, f64),
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let states = ensemble_states(model, &InitialDistribution::PointMass { x }, t, n_paths, seed)?;
    let hits = states.iter().filter(|&&y| y >= interval.0 && y <= interval.1).count();
    let p = hits as f64 / n_paths as f64;
    Ok((p, (p * (1.0 - p) / n_paths as f64).sqrt()))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
}

/// `E ξ_t^{-γ}` at each of the increasing `times`.
pub fn negative_moment_series(
    model: &ModelSpec,
    init: &InitialDistribution,
    gamma: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be >= 0, got {gamma}")));
    }
    let (alpha, beta) = init.support();
    if !(alpha > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "initial law must be supported in [α, β] with α > 0, got [{alpha}, {beta}]"
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) || n_paths < 2 {
        return Err(Error::InvalidInput("times must be nonnegative and increasing, n_paths >= 2".into()));
    }
    let sampler = init.sampler(model)?;
    let law = jump_law(model);
    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut x = sampler.draw(&mut rng);
            let mut now = 0.0;
            times
                .iter()
                .map(|&t| {
                    x = state_at(model, x, t - now, law, &mut rng);
                    now = t;
                    if gamma == 0.0 { 1.0 } else { x.powf(-gamma) }
                })
                .collect()
        })
        .collect();
    let n = n_paths as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mean = per_path.iter().map(|v| v[k]).sum::<f64>() / n;
            let var = per_path.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Estimate {
                t,
                mean,
                std_error: (var / n).sqrt(),
            }
        })
        .collect())
}

/// Function averaged along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `Σ c_k x^k`
    Polynomial { coefficients: Vec<f64> },
    Expression { expr: Expr },
}

impl Observable {
    pub fn moment(k: usize) -> Self {
        let mut coefficients = vec![0.0; k + 1];
        coefficients[k] = 1.0;
        Observable::Polynomial { coefficients }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observable::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Observable::Expression { expr } => expr.eval(x),
        }
    }

    /// `∫_0^s h(π_u x) du`.
    fn segment_integral(&self, model: &ModelSpec, x: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if let (Observable::Polynomial { coefficients }, FlowFamily::LinearDecay { a }) = (self, model.flow.family()) {
            return coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    if *c == 0.0 {
                        0.0
                    } else if k == 0 {
                        c * s
                    } else {
                        let rate = a * k as f64;
                        c * x.powi(k as i32) * -(-rate * s).exp_m1() / rate
                    }
                })
                .sum();
        }
        let pieces = (s / 0.25).ceil().max(1.0) as usize;
        let h = s / pieces as f64;
        (0..pieces)
            .map(|j| {
                let (lo, hi) = (j as f64 * h, (j + 1) as f64 * h);
                gauss8(&|u| self.eval(model.flow.advance_unchecked(x, u)), lo, hi)
            })
            .sum()
    }
}

/// Time average with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErgodicEstimate {
    pub value: f64,
    pub std_error: f64,
}

const BATCHES: usize = 20;

/// `(1/T) ∫_{T_b}^{T_b+T} h(ξ_t) dt` along one path started at `x0`.
pub fn ergodic_average(
    model: &ModelSpec,
    x0: f64,
    burn_in: f64,
    horizon: f64,
    observable: &Observable,
    seed: u64,
) -> Result<ErgodicEstimate> {
    check_start(model, x0)?;
    if !(burn_in >= 0.0 && horizon > 0.0 && (burn_in + horizon).is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need burn_in >= 0 and horizon > 0, got {burn_in}, {horizon}"
        )));
    }
    let mut rng = path_rng(seed, 0);
    let law = jump_law(model);
    let mut x = state_at(model, x0, burn_in, law, &mut rng);
    let width = horizon / BATCHES as f64;
    let mut batches = Vec::with_capacity(BATCHES);
    // memoryless gaps: the residual time to the next jump is a fresh draw at each batch edge
    for _ in 0..BATCHES {
        let mut acc = 0.0;
        let mut left = width;
        loop {
            let gap: f64 = rng.sample(law);
            if gap >= left {
                acc += observable.segment_integral(model, x, left);
                x = model.flow.advance_unchecked(x, left);
                break;
            }
            acc += observable.segment_integral(model, x, gap);
            x = model.boost.q(model.flow.advance_unchecked(x, gap));
            left -= gap;
        }
        batches.push(acc / width);
    }
    let n = BATCHES as f64;
    let value = batches.iter().sum::<f64>() / n;
    let var = batches.iter().map(|b| (b - value).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(ErgodicEstimate {
        value,
        std_error: (var / n).sqrt(),
    })
}

/// Number of jumps by time `t` on each of `n_paths` paths.
pub fn jump_counts(model: &ModelSpec, x0: f64, t: f64, n_paths: usize, seed: u64) -> Result<Vec<usize>> {
    check_start(model, x0)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_with(model, x0, t, seed, &mut path_rng(seed, i)).n_jumps())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shot() -> ModelSpec {
        ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn paths_end_at_ensemble_states() {
        let init = InitialDistribution::Uniform { a: 0.5, b: 2.0 };
        let model = shot();
        let paths = simulate_paths(&model, &init, 3.0, 20, 9).unwrap();
        let states = ensemble_states(&model, &init, 3.0, 20, 9).unwrap();
        for (p, x) in paths.iter().zip(&states) {
            assert_eq!(p.sample_at(&model, 3.0).unwrap(), *x);
        }
    }

    #[test]
    fn point_mass_density_fills_one_cell() {
        let grid = Grid::new(4.0, 8).unwrap();
        let f = InitialDistribution::PointMass { x: 1.2 }.to_density(&grid).unwrap();
        assert_eq!(f.values()[2], 2.0);
        assert!((f.total_mass() - 1.0).abs() < 1e-15);
        assert!(InitialDistribution::PointMass { x: 5.0 }.to_density(&grid).is_err());
    }

    #[test]
    fn histogram_at_time_zero_is_uniform() {
        let grid = Grid::new(2.0, 20).unwrap();
        let h = ensemble_histogram(&shot(), &InitialDistribution::Uniform { a: 0.0, b: 1.0 }, 0.0, 100_000, &grid, 1).unwrap();
        for (i, (v, e)) in h.density.values().iter().zip(&h.std_errors).enumerate() {
            let expected = if i < 10 { 1.0 } else { 0.0 };
            assert!((v - expected).abs() <= 4.0 * e.max(1e-12), "cell {i}: {v}");
        }
        assert!((h.density.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_plus_out_of_grid_is_one() {
        let grid = Grid::new(1.5, 30).unwrap();
        let h = ensemble_histogram(&shot(), &InitialDistribution::PointMass { x: 1.0 }, 3.0, 10_000, &grid, 2).unwrap();
        assert!(h.out_of_grid > 0.0);
        assert!((h.density.grid_mass() + h.out_of_grid - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_mean_from_histogram() {
        let grid = Grid::new(20.0, 200).unwrap();
        let h = ensemble_histogram(&shot(), &InitialDistribution::PointMass { x: 0.0 }, 30.0, 100_000, &grid, 3).unwrap();
        assert!((h.density.mean() - 1.0).abs() < 0.02);
    }

    #[test]
    fn ensembles_are_reproducible_across_thread_counts() {
        let model = shot();
        let init = InitialDistribution::Uniform { a: 0.0, b: 1.0 };
        let a = ensemble_states(&model, &init, 2.0, 5000, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| ensemble_states(&model, &init, 2.0, 5000, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn grid_initial_law() {
        let grid = Grid::new(4.0, 40).unwrap();
        let f = DensityVector::uniform(grid, 1.0, 2.0).unwrap();
        let states = ensemble_states(&shot(), &InitialDistribution::Grid(f), 0.0, 10_000, 4).unwrap();
        assert!(states.iter().all(|x| (1.0 - 1e-12..=2.0 + 1e-12).contains(x)));
    }

    #[test]
    fn negative_moment_examples() {
        let model = shot();
        let init = InitialDistribution::PointMass { x: 2.0 };
        let m = negative_moment_series(&model, &init, 1.0, &[0.0, 1.0], 1000, 1).unwrap();
        assert_eq!(m[0].mean, 0.5);
        let m0 = negative_moment_series(&model, &init, 0.0, &[0.0, 3.0], 1000, 1).unwrap();
        assert!(m0.iter().all(|e| e.mean == 1.0 && e.std_error == 0.0));
        let touching = InitialDistribution::Uniform { a: 0.0, b: 1.0 };
        assert!(negative_moment_series(&model, &touching, 1.0, &[1.0], 10, 1).is_err());
    }

    #[test]
    fn ergodic_examples() {
        let model = shot();
        let one = ergodic_average(&model, 1.0, 10.0, 100.0, &Observable::moment(0), 5).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);
        let mean = ergodic_average(&model, 1.0, 50.0, 20_000.0, &Observable::moment(1), 5).unwrap();
        assert!((mean.value - 1.0).abs() < 0.03, "{mean:?}");
    }

    #[test]
    fn segment_integral_quadrature_matches_closed_form() {
        let model = shot();
        let poly = Observable::Polynomial { coefficients: vec![0.5, -1.0, 2.0] };
        let expr = Observable::Expression { expr: Expr::parse("0.5 - x + 2*x^2").unwrap() };
        for s in [0.1, 1.0, 3.7] {
            let a = poly.segment_integral(&model, 1.3, s);
            let b = expr.segment_integral(&model, 1.3, s);
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn one_jump_fraction() {
        let counts = jump_counts(&shot(), 1.0, 1.5, 100_000, 8).unwrap();
        let p = counts.iter().filter(|&&c| c == 1).count() as f64 / 1e5;
        let exact = 1.5 * (-1.5f64).exp();
        assert!((p - exact).abs() < 3.0 * (exact * (1.0 - exact) / 1e5).sqrt());
    }
}
