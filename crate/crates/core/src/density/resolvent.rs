//! Resolvent of the plateau-mode transport generator `A₀ f = -(g f)' - Λ f`
//! with influx `Λ ∫_K^M f` through `M`.

use super::generator::{transport_triplets, Csr};
use super::grid::{DensityVector, Grid};
use crate::error::{Error, Result};
use crate::flow::FlowFamily;
use crate::model::{ModelSpec, PhaseSpace};
use crate::quadrature::{gauss8, gauss8_graded, gauss8_points};

/// Cell averages of `R(λ, A₀) f` and the boundary constant `I(λ, f)`.
#[derive(Debug, Clone)]
pub struct ResolventOutput {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// `∫_K^M R(λ, A₀) f`.
    pub boundary_mass: f64,
}

impl ResolventOutput {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }
}

/// `φ(x) = ∫_x^M dr / g(r)` (nonpositive), closed form where available.
struct Phi<'a> {
    model: &'a ModelSpec,
    m: f64,
    /// `φ` at cell edges for the quadrature fallback.
    edges: Vec<f64>,
    grid: Grid,
}

impl<'a> Phi<'a> {
    fn new(model: &'a ModelSpec, grid: Grid, m: f64) -> Self {
        let mut phi = Phi { model, m, edges: Vec::new(), grid };
        if matches!(model.flow.family(), FlowFamily::Custom { .. }) {
            let n = grid.n_cells();
            let mut edges = vec![0.0; n + 1];
            for i in (1..n).rev() {
                edges[i] = edges[i + 1] + phi.integral(grid.left(i), grid.left(i + 1));
            }
            edges[0] = f64::NEG_INFINITY;
            phi.edges = edges;
        }
        phi
    }

    /// `∫_a^b dr / g(r)` for `0 < a ≤ b`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        gauss8_graded(&|r: f64| 1.0 / self.model.flow.g(r), a, b)
    }

    fn at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self.model.flow.family() {
            FlowFamily::LinearDecay { a } => -(self.m / x).ln() / a,
            FlowFamily::PowerDecay { a, p } => {
                let q = p - 1.0;
                -(x.powf(-q) - self.m.powf(-q)) / (a * q)
            }
            FlowFamily::Custom { .. } => {
                let i = self.grid.cell_of(x);
                self.edges[i + 1] + self.integral(x, self.grid.right(i))
            }
        }
    }
}

fn plateau_model(model: &ModelSpec) -> Result<(f64, f64)> {
    let PhaseSpace::Interval { m } = model.phase_space() else {
        return Err(Error::Unsupported("resolvent of A₀ is defined on bounded domains".into()));
    };
    let Some((k, _)) = model.boost.plateau_bounds() else {
        return Err(Error::Unsupported("resolvent of A₀ needs a plateau boost".into()));
    };
    Ok((k, m))
}

fn check_grid(model: &ModelSpec, grid: &Grid, m: f64) -> Result<()> {
    if (grid.x_max() - m).abs() > 1e-12 * m {
        return Err(Error::GridMismatch(format!("grid ends at {} but M = {m}", grid.x_max())));
    }
    for i in 0..grid.n_cells() {
        for (x, _) in gauss8_points(grid.left(i), grid.right(i)).chain([(grid.right(i), 0.0)]) {
            if !(model.flow.g(x) < 0.0) {
                return Err(Error::Domain(format!("g vanishes or changes sign at x={x}")));
            }
        }
    }
    Ok(())
}

/// Evaluates `R(λ, A₀) f` from the closed form, returning cell averages.
pub fn resolvent_a0(
    model: &ModelSpec,
    grid: &Grid,
    lambda_res: f64,
    f: &DensityVector,
) -> Result<ResolventOutput> {
    let (k, m) = plateau_model(model)?;
    if !(lambda_res > 0.0 && lambda_res.is_finite()) {
        return Err(Error::InvalidInput(format!("λ must be > 0, got {lambda_res}")));
    }
    if f.grid() != grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid(), grid)));
    }
    check_grid(model, grid, m)?;
    let n = grid.n_cells();
    let dx = grid.dx();
    let big_lam = model.lambda;
    let c = lambda_res + big_lam;
    let phi = Phi::new(model, *grid, m);
    let fv = f.values();

    // E(x) = ∫_x^M f(r) e^{c(φ(x) - φ(r))} dr, first at the left edges
    let inner = |x: f64, b: f64| gauss8_graded(&|r: f64| (c * (phi.at(x) - phi.at(r))).exp(), x, b);
    let mut e_left = vec![0.0; n + 1];
    for i in (1..n).rev() {
        let (l, r) = (grid.left(i), grid.right(i));
        e_left[i] = (c * (phi.at(l) - phi.at(r))).exp() * e_left[i + 1] + fv[i] * inner(l, r);
    }
    let e_at = |x: f64, i: usize| {
        let r = grid.right(i);
        (c * (phi.at(x) - phi.at(r))).exp() * e_left[i + 1] + fv[i] * inner(x, r)
    };
    let j_fn = |x: f64, i: usize| e_at(x, i) / -model.flow.g(x);

    // cell integrals of J; the first cell is graded towards the singular end
    let cell_j = |lo: f64, hi: f64, i: usize| {
        if i == 0 {
            gauss8_graded(&|x| j_fn(x, 0), (hi * 1e-14).max(lo), hi)
        } else {
            gauss8(&|x| j_fn(x, i), lo, hi)
        }
    };
    let j_int: Vec<f64> = (0..n).map(|i| cell_j(grid.left(i), grid.right(i), i)).collect();

    // ∫_K^M J and ∫_K^M h, with h = e^{cφ}/|g| and ∫_a^b h = (e^{cφ(b)} - e^{cφ(a)})/c
    let mut j_plateau = 0.0;
    for i in 0..n {
        let (l, r) = (grid.left(i), grid.right(i));
        if r <= k {
            continue;
        }
        j_plateau += if l >= k { j_int[i] } else { cell_j(k, r, i) };
    }
    let h_plateau = (1.0 - (c * phi.at(k)).exp()) / c;
    let boundary_mass = j_plateau / (1.0 - big_lam * h_plateau);

    let values = (0..n)
        .map(|i| {
            let (l, r) = (grid.left(i), grid.right(i));
            let h_cell = ((c * phi.at(r)).exp() - (c * phi.at(l)).exp()) / c;
            ((big_lam * boundary_mass * h_cell + j_int[i]) / dx).max(0.0)
        })
        .collect();
    Ok(ResolventOutput {
        grid: *grid,
        values,
        boundary_mass,
    })
}

/// Discrete `A₀`: upwind transport, loss at rate `Λ`, and plateau mass
/// re-entering the last cell at rate `Λ`.
pub(crate) fn discrete_a0(model: &ModelSpec, grid: &Grid) -> Result<Csr> {
    let (k, _) = plateau_model(model)?;
    let n = grid.n_cells();
    let lam = model.lambda;
    let (mut t, _) = transport_triplets(model, grid);
    for i in 0..n {
        t.push((i, i, -lam));
        let overlap = (grid.right(i) - grid.left(i).max(k)).max(0.0) / grid.dx();
        if overlap > 0.0 {
            t.push((n - 1, i, lam * overlap));
        }
    }
    Ok(Csr::from_triplets(n, t))
}

/// `‖(λ - A₀) r - f‖₁` with the discrete `A₀`, in density units.
pub fn resolvent_identity_error(
    model: &ModelSpec,
    lambda_res: f64,
    f: &DensityVector,
    r: &ResolventOutput,
) -> Result<f64> {
    let grid = r.grid;
    let a0 = discrete_a0(model, &grid)?;
    let dx = grid.dx();
    let masses: Vec<f64> = r.values.iter().map(|v| v * dx).collect();
    let mut out = vec![0.0; grid.n_cells()];
    a0.matvec(&masses, &mut out);
    Ok(masses
        .iter()
        .zip(&out)
        .zip(f.masses())
        .map(|((m, am), fm)| (lambda_res * m - am - fm).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::BoostMap;
    use crate::flow::FlowModel;

    fn model() -> ModelSpec {
        ModelSpec::new(
            FlowModel::linear(1.0).with_domain(PhaseSpace::Interval { m: 10.0 }),
            BoostMap::plateau(6.0, 10.0, "(x + 10)/2").unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn positive_and_satisfies_identity() {
        let model = model();
        for n in [200, 400] {
            let grid = Grid::new(10.0, n).unwrap();
            let f = DensityVector::from_fn(grid, |x| (std::f64::consts::PI * x / 10.0).sin().powi(2)).unwrap();
            let mut prev = f64::INFINITY;
            for lam in [0.5, 1.0, 5.0] {
                let r = resolvent_a0(&model, &grid, lam, &f).unwrap();
                assert!(r.values.iter().all(|v| *v >= 0.0));
                let err = resolvent_identity_error(&model, lam, &f, &r).unwrap();
                assert!(err <= 5.0 / n as f64, "n={n} λ={lam} err={err}");
                prev = prev.min(err);
            }
            assert!(prev > 0.0);
        }
    }

    #[test]
    fn identity_error_is_first_order() {
        // a jump in f costs |Δf| Δx / 2 in the upwind flux, so the error halves with Δx
        let model = model();
        let err = |n: usize| {
            let grid = Grid::new(10.0, n).unwrap();
            let f = DensityVector::uniform(grid, 2.0, 5.0).unwrap();
            let r = resolvent_a0(&model, &grid, 1.0, &f).unwrap();
            resolvent_identity_error(&model, 1.0, &f, &r).unwrap()
        };
        let (e1, e2) = (err(200), err(400));
        assert!((e1 / e2 - 2.0).abs() < 0.1, "{e1} {e2}");
    }

    #[test]
    fn boundary_constant_is_plateau_mass() {
        let model = model();
        let grid = Grid::new(10.0, 500).unwrap();
        let f = DensityVector::uniform(grid, 0.0, 10.0).unwrap();
        let r = resolvent_a0(&model, &grid, 1.0, &f).unwrap();
        let dx = grid.dx();
        let plateau: f64 = r.values.iter().enumerate().filter(|(i, _)| grid.left(*i) >= 6.0).map(|(_, v)| v * dx).sum();
        assert!((plateau - r.boundary_mass).abs() < 1e-10);
        // A₀ loses mass at rate Λ from [0, K): ∫ R f ≤ ∫ f / λ
        assert!(r.mass() <= 1.0 + 1e-9);
    }

    #[test]
    fn large_lambda_limit() {
        let model = model();
        let grid = Grid::new(10.0, 400).unwrap();
        let f = DensityVector::from_fn(grid, |x| (-(x - 5.0f64).powi(2)).exp()).unwrap();
        let err = |lam: f64| {
            let r = resolvent_a0(&model, &grid, lam, &f).unwrap();
            r.values.iter().zip(f.values()).map(|(a, b)| (lam * a - b).abs()).sum::<f64>() * grid.dx()
        };
        let (e1, e2, e3) = (err(10.0), err(100.0), err(1000.0));
        assert!(e2 < e1 && e3 < e2 && e3 < 0.02, "{e1} {e2} {e3}");
    }

    #[test]
    fn custom_flow_matches_closed_form() {
        let closed = model();
        let custom = ModelSpec::new(
            FlowModel::custom("-x").unwrap().with_domain(PhaseSpace::Interval { m: 10.0 }),
            closed.boost.clone(),
            1.0,
        )
        .unwrap();
        let grid = Grid::new(10.0, 100).unwrap();
        let f = DensityVector::uniform(grid, 1.0, 3.0).unwrap();
        let a = resolvent_a0(&closed, &grid, 1.0, &f).unwrap();
        let b = resolvent_a0(&custom, &grid, 1.0, &f).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn rejects_unsupported_models() {
        let shot = ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(10.0, 10).unwrap();
        let f = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
        assert!(matches!(resolvent_a0(&shot, &grid, 1.0, &f), Err(Error::Unsupported(_))));
        assert!(resolvent_a0(&model(), &grid, 0.0, &f).is_err());
    }
}
