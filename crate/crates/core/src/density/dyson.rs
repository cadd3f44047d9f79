//! Truncated Dyson–Phillips expansion grouped by the number of jumps.
//!
//! `U(t) f = e^{-Λt} Σ_n Λ^n S_n(t) f` with `S_0` the pure transport and
//! `S_{n+1}(t) = ∫_0^t S_0(t-s) P_Q S_n(s) ds`. Every `S_n` is kept on the
//! same uniform time grid, so each level costs one pass of the convolution
//! and nothing is nested. In plateau mode `P_Q` is the Ulam matrix with the
//! `[K, M]` mass routed into the last cell.

use super::grid::{DensityVector, Grid};
use crate::boost::FpMatrix;
use crate::error::{Error, Result};
use crate::flow::{Backward, FlowModel};
use crate::model::ModelSpec;

pub const DEFAULT_QUAD_INTERVALS: usize = 64;

/// Partial sum, its individual terms and the mass of everything dropped.
#[derive(Debug, Clone)]
pub struct DysonPhillips {
    /// `e^{-Λt} Λ^n S_n(t) f0` for `n = 0..=N`.
    pub terms: Vec<DensityVector>,
    pub partial_sum: DensityVector,
    /// `1 - e^{-Λt} Σ_{n≤N} (Λt)^n / n!`.
    pub tail_bound: f64,
}

/// Exact transport of piecewise-constant cell masses: the mass landing in
/// cell `i` after time `τ` is the mass between the backward images of its edges.
struct Transport {
    /// `edges[m][i] = π_{-m h}(x_i)`; `∞` when no state reaches `x_i`.
    edges: Vec<Vec<f64>>,
    grid: Grid,
}

impl Transport {
    fn new(flow: &FlowModel, grid: Grid, h: f64, offsets: usize) -> Self {
        let n = grid.n_cells();
        let mut edges = Vec::with_capacity(offsets + 1);
        edges.push((0..=n).map(|i| grid.left(i)).collect::<Vec<_>>());
        for m in 1..=offsets {
            let prev: &Vec<f64> = &edges[m - 1];
            let next = prev
                .iter()
                .map(|&x| {
                    if !x.is_finite() {
                        return f64::INFINITY;
                    }
                    match flow.advance_back_unchecked(x, h) {
                        Backward::Reached(y) => y,
                        Backward::NotReachable => f64::INFINITY,
                    }
                })
                .collect();
            edges.push(next);
        }
        Self { edges, grid }
    }

    /// Adds `weight · S_0(m h) u` to `out`; slot `n` carries escaped mass unchanged.
    fn apply_add(&self, m: usize, u: &[f64], weight: f64, out: &mut [f64], cum: &mut Vec<f64>) {
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        cum.clear();
        cum.push(0.0);
        let mut acc = 0.0;
        for &v in &u[..n] {
            acc += v;
            cum.push(acc);
        }
        let cdf = |y: f64| -> f64 {
            if y >= self.grid.x_max() {
                return cum[n];
            }
            let c = ((y / dx).floor() as usize).min(n - 1);
            cum[c] + u[c] * ((y - self.grid.left(c)) / dx).clamp(0.0, 1.0)
        };
        let e = &self.edges[m];
        let mut lo = cdf(e[0]);
        for i in 0..n {
            let hi = cdf(e[i + 1]);
            out[i] += weight * (hi - lo);
            lo = hi;
        }
        out[n] += weight * u[n];
    }
}

/// Composite Newton–Cotes weights on `k` equal intervals of width `h`.
fn quad_weights(k: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; k + 1];
    match k {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let simpson_end = if k.is_multiple_of(2) { k } else { k - 3 };
            for j in (0..simpson_end).step_by(2) {
                w[j] += h / 3.0;
                w[j + 1] += 4.0 * h / 3.0;
                w[j + 2] += h / 3.0;
            }
            if k % 2 == 1 {
                let s = simpson_end;
                let c = 3.0 * h / 8.0;
                w[s] += c;
                w[s + 1] += 3.0 * c;
                w[s + 2] += 3.0 * c;
                w[s + 3] += c;
            }
        }
    }
    w
}

fn push_forward(fp: &FpMatrix, u: &[f64]) -> Vec<f64> {
    let n = fp.n_cells();
    let (mut out, over) = fp.push_forward(&u[..n]);
    out.push(over + u[n]);
    out
}

/// `1 - e^{-x} Σ_{n≤N} x^n / n!`, summed from the tail when that is more accurate.
pub fn poisson_tail(x: f64, n_max: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = (-x).exp();
    let mut head = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            term *= x / n as f64;
        }
        head += term;
    }
    if head < 0.5 {
        return 1.0 - head;
    }
    let mut tail = 0.0;
    let mut k = n_max + 1;
    loop {
        term *= x / k as f64;
        tail += term;
        if term < 1e-18 * tail.max(1e-300) || k > n_max + 10_000 {
            break;
        }
        k += 1;
    }
    tail
}

/// Expansion with the default 64 quadrature intervals.
pub fn dyson_phillips(
    model: &ModelSpec,
    grid: &Grid,
    f0: &DensityVector,
    t: f64,
    n_terms: usize,
) -> Result<DysonPhillips> {
    dyson_phillips_with(model, grid, f0, t, n_terms, DEFAULT_QUAD_INTERVALS)
}

pub fn dyson_phillips_with(
    model: &ModelSpec,
    grid: &Grid,
    f0: &DensityVector,
    t: f64,
    n_terms: usize,
    n_quad: usize,
) -> Result<DysonPhillips> {
    if f0.grid() != grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f0.grid(), grid)));
    }
    if !(t >= 0.0 && t.is_finite()) || n_quad == 0 {
        return Err(Error::InvalidInput(format!(
            "need finite t >= 0 and n_quad >= 1, got t={t}, n_quad={n_quad}"
        )));
    }
    let n = grid.n_cells();
    let fp = model.boost.build_fp_matrix(grid)?;
    let lam = model.lambda;
    let h = t / n_quad as f64;
    let transport = Transport::new(&model.flow, *grid, h, n_quad);
    let mut cum = Vec::with_capacity(n + 1);

    let mut u0 = f0.masses();
    u0.push(f0.escaped_mass());

    // level 0 at every node
    let mut level: Vec<Vec<f64>> = (0..=n_quad)
        .map(|k| {
            let mut out = vec![0.0; n + 1];
            transport.apply_add(k, &u0, 1.0, &mut out, &mut cum);
            out
        })
        .collect();

    let scale = (-lam * t).exp();
    let to_density = |u: &[f64], factor: f64| {
        let values = u[..n].iter().map(|m| (m * factor / grid.dx()).max(0.0)).collect();
        DensityVector::from_parts(*grid, values, (u[n] * factor).max(0.0))
    };
    let mut terms = vec![to_density(&level[n_quad], scale)];
    let mut factor = scale;

    for _ in 0..n_terms {
        let jumped: Vec<Vec<f64>> = level.iter().map(|u| push_forward(&fp, u)).collect();
        let mut next = vec![vec![0.0; n + 1]; n_quad + 1];
        for (k, out) in next.iter_mut().enumerate().skip(1) {
            let w = quad_weights(k, h);
            for (j, wj) in w.iter().enumerate() {
                if *wj != 0.0 {
                    transport.apply_add(k - j, &jumped[j], *wj, out, &mut cum);
                }
            }
        }
        level = next;
        factor *= lam;
        terms.push(to_density(&level[n_quad], factor));
    }

    let mut values = vec![0.0; n];
    let mut escaped = 0.0;
    for term in &terms {
        for (v, x) in values.iter_mut().zip(term.values()) {
            *v += x;
        }
        escaped += term.escaped_mass();
    }
    Ok(DysonPhillips {
        terms,
        partial_sum: DensityVector::from_parts(*grid, values, escaped),
        tail_bound: poisson_tail(lam * t, n_terms),
    })
}

/// Smallest `N` whose Poisson tail at `Λt` is below `target`.
pub fn terms_for_tail(lambda_t: f64, target: f64) -> usize {
    (0..).find(|&n| poisson_tail(lambda_t, n) < target).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{build_generator, evolve, total_variation};

    fn poisson(x: f64, n: usize) -> f64 {
        (-x).exp() * x.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>()
    }

    #[test]
    fn quadrature_weights_integrate_cubics() {
        for k in 1..12 {
            let h = 0.3;
            let w = quad_weights(k, h);
            let exact = (k as f64 * h).powi(if k == 1 { 2 } else { 4 }) / if k == 1 { 2.0 } else { 4.0 };
            let p = if k == 1 { 1 } else { 3 };
            let approx: f64 = w.iter().enumerate().map(|(j, wj)| wj * (j as f64 * h).powi(p)).sum();
            assert!((approx - exact).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn tail_bound_matches_direct_sum() {
        for &x in &[0.0, 0.5, 2.0, 7.0] {
            for n in 0..8 {
                let direct = 1.0 - (0..=n).map(|k| poisson(x, k)).sum::<f64>();
                assert!((poisson_tail(x, n) - direct).abs() < 1e-12);
            }
        }
        assert_eq!(terms_for_tail(1.0, 1e-3), 5);
    }

    #[test]
    fn zero_rate_time_is_pure_transport() {
        let model = ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(8.0, 200).unwrap();
        let f = DensityVector::uniform(grid, 1.0, 2.0).unwrap();
        let dp = dyson_phillips(&model, &grid, &f, 0.0, 0).unwrap();
        assert_eq!(dp.tail_bound, 0.0);
        assert!(total_variation(&dp.partial_sum, &f).unwrap() < 1e-15);
    }

    #[test]
    fn term_masses_are_poisson() {
        let model = ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(16.0, 400).unwrap();
        let f = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
        let dp = dyson_phillips(&model, &grid, &f, 2.0, 5).unwrap();
        for (n, term) in dp.terms.iter().enumerate() {
            assert!((term.total_mass() - poisson(2.0, n)).abs() < 1e-4, "n={n}");
        }
        let total: f64 = dp.partial_sum.total_mass();
        assert!((total + dp.tail_bound - 1.0).abs() < 1e-4);
    }

    #[test]
    fn agrees_with_evolve() {
        let model = ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(8.0, 800).unwrap();
        let f = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
        let n = terms_for_tail(1.0, 1e-3);
        let dp = dyson_phillips(&model, &grid, &f, 1.0, n).unwrap();
        let a = build_generator(&model, &grid).unwrap();
        let u = evolve(&a, &f, 1.0).unwrap();
        let l1 = 2.0 * total_variation(&dp.partial_sum, &u).unwrap();
        assert!(l1 < 0.05, "{l1}");
    }
}
