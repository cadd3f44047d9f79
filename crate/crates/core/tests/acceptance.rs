//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use antibody_lab::cli::run;
use antibody_lab::density::{
    build_generator, dyson_phillips, evolve, evolve_checkpoints, resolvent_a0, resolvent_identity_error,
    stationary_density, terms_for_tail, total_variation,
};
use antibody_lab::stability::{
    classify_power_law, empirical_tightness, generator_apply, sweeping_rate, LyapunovFunction, TightnessSettings,
    TightnessStatus, VerdictKind, DEFAULT_TOL,
};
use antibody_lab::trajectory::{
    ensemble_histogram, ergodic_average, negative_moment_series, path_rng, reach, reach_dtau, transition_lower_bound,
    transition_probability, verify_minorization, InitialDistribution, Interval, Minorization, Observable,
};
use antibody_lab::{BoostMap, DensityVector, FlowModel, Grid, ModelSpec, PhaseSpace};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn shot() -> ModelSpec {
    ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Flow Jacobian against central differences of the flow.
fn flow_jacobian() -> Outcome {
    let flows = [
        ("-x", FlowModel::linear(1.0)),
        ("-x^2", FlowModel::power(1.0, 2.0)),
        ("custom", FlowModel::custom("-x - 0.5*x^2").unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for (_, flow) in &flows {
        for &x in &linspace(0.1, 5.0, 10) {
            for &t in &linspace(0.1, 2.0, 10) {
                let h = 1e-3 * x;
                let fd = (flow.advance(x + h, t).unwrap() - flow.advance(x - h, t).unwrap()) / (2.0 * h);
                let j = flow.flow_jacobian(x, t).unwrap();
                worst = worst.max((fd - j).abs() / j.abs());
            }
        }
    }
    check(worst <= 1e-5, format!("max rel error {worst:.2e} (tol 1e-5) over 3 flows × 10×10 (x, t)"))
}

/// `∂r/∂τ` against finite differences, and its `τ = 0`, large-`t` limit.
fn reach_derivative() -> Outcome {
    let models = [
        shot(),
        ModelSpec::affine(0.5, 2.0, 0.1, 1.0).unwrap(),
        ModelSpec::new(FlowModel::power(1.0, 2.0), BoostMap::additive(1.0), 1.0).unwrap(),
    ];
    let mut rng = path_rng(2024, 0);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let m = &models[k % models.len()];
        let t = rng.random_range(0.1..5.0);
        let h = 1e-4 * t;
        let tau = rng.random_range(h..t - h);
        let x = rng.random_range(0.1..5.0);
        let fd = (reach(m, tau + h, t, x).unwrap() - reach(m, tau - h, t, x).unwrap()) / (2.0 * h);
        let d = reach_dtau(m, tau, t, x).unwrap();
        worst = worst.max((fd - d).abs() / d.abs());
    }
    // linear decay drives π_20 x to 0, so ∂r/∂τ(0) → g(Q(0))
    let mut limit: f64 = 0.0;
    for m in &models[..2] {
        let target = m.flow.g(m.boost.apply(0.0).unwrap());
        for x in [0.5, 1.0, 5.0] {
            limit = limit.max((reach_dtau(m, 0.0, 20.0, x).unwrap() - target).abs());
        }
    }
    check(
        worst <= 1e-5 && limit <= 1e-3,
        format!("max rel error {worst:.2e} (tol 1e-5) over 1000 samples; |∂r/∂τ(0, 20) - g(Q(0))| = {limit:.2e} (tol 1e-3)"),
    )
}

/// Monte Carlo transition probabilities stay above the one-jump lower bound.
fn transition_bound() -> Outcome {
    let m = shot();
    let mut rng = path_rng(99, 0);
    let mut worst = f64::INFINITY;
    let mut positive = 0;
    for k in 0..20 {
        let x = rng.random_range(0.1..5.0);
        let t = rng.random_range(0.5..4.0);
        let lo = rng.random_range(0.0..3.0);
        let hi = lo + rng.random_range(0.2..2.0);
        let bound = transition_lower_bound(&m, x, t, Interval::new(lo, hi).unwrap()).unwrap();
        let (p, se) = transition_probability(&m, x, t, (lo, hi), 100_000, 500 + k).unwrap();
        worst = worst.min((p - bound) / se.max(1e-12));
        if bound > 0.0 {
            positive += 1;
        }
    }
    check(
        worst >= -3.0,
        format!("min (p̂ - bound)/se = {worst:.2} (need ≥ -3) over 20 cases, {positive} with a positive bound"),
    )
}

/// Minorization certificates and their Monte Carlo check.
fn minorization() -> Outcome {
    let m = shot();
    let (t, radius) = (2.0, 0.1);
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, x0) in [0.5, 1.0, 5.0].into_iter().enumerate() {
        let Minorization::Certificate(c) = verify_minorization(&m, x0, t, radius).unwrap() else {
            ok = false;
            lines.push(format!("x0={x0}: no certificate"));
            continue;
        };
        let d = c.delta_interval;
        let long_enough = d.len() >= c.delta * c.tau0 / 3.0 && !d.is_empty();
        let target = c.level * d.len();
        let mut worst = f64::INFINITY;
        for (j, x) in [x0 - radius, x0, x0 + radius].into_iter().enumerate() {
            let (p, se) = transition_probability(&m, x, t, (d.lo, d.hi), 100_000, 40 + 3 * k as u64 + j as u64).unwrap();
            worst = worst.min((p - target) / se);
        }
        ok &= long_enough && worst >= -3.0;
        lines.push(format!("x0={x0}: |Δ|={:.3} ≥ δτ0/3={:.3}, min z={worst:.1}", d.len(), c.delta * c.tau0 / 3.0));
    }
    check(ok, lines.join("; "))
}

/// Ensemble histogram against the density solver.
fn mc_pde() -> Outcome {
    let m = shot();
    let grid = Grid::new(8.0, 1000).unwrap();
    let f0 = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
    let u = evolve(&build_generator(&m, &grid).unwrap(), &f0, 2.0).unwrap();
    let init = InitialDistribution::Uniform { a: 0.0, b: 1.0 };
    let h = ensemble_histogram(&m, &init, 2.0, 1_000_000, &grid, 5).unwrap();
    let tv = total_variation(&u, &h.density).unwrap();
    // split the distance into solver error and sampling noise
    let fine_grid = Grid::new(8.0, 16_000).unwrap();
    let fine = evolve(
        &build_generator(&m, &fine_grid).unwrap(),
        &DensityVector::uniform(fine_grid, 0.0, 1.0).unwrap(),
        2.0,
    )
    .unwrap();
    let masses: Vec<f64> = fine.masses().chunks(16).map(|c| c.iter().sum()).collect();
    let reference = DensityVector::from_masses(grid, &masses, fine.escaped_mass()).unwrap();
    let solver = total_variation(&u, &reference).unwrap();
    let noise = total_variation(&reference, &h.density).unwrap();
    check(
        tv <= 0.02,
        format!("TV = {tv:.4} (tol 0.02); solver vs 16000-cell solve {solver:.4}, histogram vs 16000-cell solve {noise:.4}"),
    )
}

/// Stationary moments of the shot-noise model from the solver and from time averages.
fn stationary_moments() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (a, l, lam) in [(1.0, 1.0, 1.0), (2.0, 0.5, 3.0)] {
        let m = ModelSpec::shot_noise(a, l, lam).unwrap();
        // moment equations from ℒ: ℒx = c0 + c1 x, ℒx² = d0 + d1 x + d2 x²
        let lv = |v: &LyapunovFunction, x: f64| generator_apply(&m, v, x).unwrap();
        let (v1, v2) = (LyapunovFunction::Identity, LyapunovFunction::Power { gamma: 2.0 });
        let c0 = lv(&v1, 0.0);
        let c1 = lv(&v1, 1.0) - c0;
        let mean = -c0 / c1;
        let d0 = lv(&v2, 0.0);
        let (p1, p2) = (lv(&v2, 1.0) - d0, lv(&v2, 2.0) - d0);
        let d2 = (p2 - 2.0 * p1) / 2.0;
        let d1 = p1 - d2;
        let second = -(d0 + d1 * mean) / d2;
        let closed = (lam * l / a, lam * l * l * (2.0 * lam / a + 1.0) / (2.0 * a));
        ok &= (mean - closed.0).abs() < 1e-12 * closed.0 && (second - closed.1).abs() < 1e-12 * closed.1;

        let x_max = 16.0 * mean.max(1.0);
        let grid = Grid::new(x_max, (x_max / 0.01) as usize).unwrap();
        let s = stationary_density(&build_generator(&m, &grid).unwrap()).unwrap();
        let solver = (s.density.moment(1), s.density.moment(2));
        let e1 = ergodic_average(&m, mean, 50.0, 200_000.0, &Observable::moment(1), 11).unwrap();
        let e2 = ergodic_average(&m, mean, 50.0, 200_000.0, &Observable::moment(2), 11).unwrap();
        let rel = [
            (solver.0 - mean) / mean,
            (solver.1 - second) / second,
            (e1.value - mean) / mean,
            (e2.value - second) / second,
        ];
        let worst = rel.iter().fold(0.0f64, |w, r| w.max(r.abs()));
        ok &= worst <= 0.02;
        lines.push(format!("(a={a}, L={l}, Λ={lam}): max rel error {worst:.2e}"));
    }
    check(ok, format!("{} (tol 2%)", lines.join("; ")))
}

/// Sums masses of `fine` pairwise onto a grid with half the cells.
fn coarsen(fine: &DensityVector, coarse: Grid) -> DensityVector {
    let m = fine.masses();
    let pairs: Vec<f64> = m.chunks(2).map(|c| c.iter().sum()).collect();
    DensityVector::from_masses(coarse, &pairs, fine.escaped_mass()).unwrap()
}

/// `‖u_n - u_{2n}‖₁ / (1 - 2^{-p})` with the order `p` observed on `n, 2n, 4n`.
fn richardson(solutions: &[DensityVector; 3], grids: &[Grid; 3]) -> f64 {
    let d01 = 2.0 * total_variation(&solutions[0], &coarsen(&solutions[1], grids[0])).unwrap();
    let d12 = 2.0 * total_variation(&solutions[1], &coarsen(&solutions[2], grids[1])).unwrap();
    let p = (d01 / d12).log2().clamp(0.25, 2.0);
    d01 / (1.0 - 2f64.powf(-p))
}

/// Term masses of the Dyson–Phillips expansion and agreement of its truncation with `evolve`.
fn dyson_phillips_structure() -> Outcome {
    let m = shot();
    let mut worst_mass: f64 = 0.0;
    let grid = Grid::new(16.0, 400).unwrap();
    let f = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
    for lt in [0.5, 1.0, 2.0] {
        let dp = dyson_phillips(&m, &grid, &f, lt, 5).unwrap();
        let mut poisson = (-lt).exp();
        for (n, term) in dp.terms.iter().enumerate() {
            if n > 0 {
                poisson *= lt / n as f64;
            }
            worst_mass = worst_mass.max((term.total_mass() - poisson).abs());
        }
    }
    let mut lines = vec![format!("max term-mass error {worst_mass:.2e} (tol 1e-4)")];
    let mut ok = worst_mass <= 1e-4;
    let grids = [200, 400, 800].map(|n| Grid::new(8.0, n).unwrap());
    for t in [0.5, 1.0, 2.0] {
        let n_terms = terms_for_tail(m.lambda * t, 1e-3);
        let f0s = grids.map(|g| DensityVector::uniform(g, 0.0, 1.0).unwrap());
        let dps: Vec<_> = grids
            .iter()
            .zip(&f0s)
            .map(|(g, f)| dyson_phillips(&m, g, f, t, n_terms).unwrap())
            .collect();
        let evs: Vec<_> = grids
            .iter()
            .zip(&f0s)
            .map(|(g, f)| evolve(&build_generator(&m, g).unwrap(), f, t).unwrap())
            .collect();
        let budget = richardson(&[dps[0].partial_sum.clone(), dps[1].partial_sum.clone(), dps[2].partial_sum.clone()], &grids)
            + richardson(&[evs[0].clone(), evs[1].clone(), evs[2].clone()], &grids);
        let l1 = 2.0 * total_variation(&dps[0].partial_sum, &evs[0]).unwrap();
        ok &= l1 <= 2e-3 + budget;
        lines.push(format!("t={t}: L1 {l1:.4} ≤ 2e-3 + {budget:.4}"));
    }
    check(ok, lines.join("; "))
}

/// The power-law phase boundary and its empirical confirmation.
fn phase_boundary() -> Outcome {
    let verdicts: Vec<(f64, VerdictKind)> = (5..=10)
        .map(|k| {
            let a = k as f64 / 10.0;
            (a, classify_power_law(a, 2.0, 1.0, DEFAULT_TOL).unwrap().verdict)
        })
        .collect();
    let flips = verdicts
        .iter()
        .all(|(a, v)| *v == if *a < 2f64.ln() { VerdictKind::Sweeping } else { VerdictKind::Stable });

    // a = 0.5: escaping mass and decay of E ξ^{-0.1}
    let sweeping = ModelSpec::affine(0.5, 2.0, 0.1, 1.0).unwrap();
    let grid = Grid::new(100.0, 400).unwrap();
    let f0 = DensityVector::uniform(grid, 0.5, 1.5).unwrap();
    let esc = empirical_tightness(&sweeping, &grid, &f0, 100.0, &TightnessSettings::default()).unwrap();
    let init = InitialDistribution::Uniform { a: 0.5, b: 1.5 };
    let (t1, t2) = (5.0, 25.0);
    let m1 = negative_moment_series(&sweeping, &init, 0.1, &[t1], 200_000, 1).unwrap()[0];
    let m2 = negative_moment_series(&sweeping, &init, 0.1, &[t2], 200_000, 2).unwrap()[0];
    let slope = (m2.mean.ln() - m1.mean.ln()) / (t2 - t1);
    let slope_se = ((m1.std_error / m1.mean).powi(2) + (m2.std_error / m2.mean).powi(2)).sqrt() / (t2 - t1);
    let c = sweeping_rate(0.5, 2.0, 1.0, 0.1);
    let moment_ok = slope <= c + 3.0 * slope_se;

    // a = 1.0: tight on [0, 8] for g = -x, Q = x + 1
    let grid = Grid::new(16.0, 400).unwrap();
    let f0 = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
    let settings = TightnessSettings {
        compacta: Some(vec![8.0]),
        ..Default::default()
    };
    let tight = empirical_tightness(&shot(), &grid, &f0, 40.0, &settings).unwrap();
    let min_mass = tight.mass[0].iter().copied().fold(f64::INFINITY, f64::min);

    check(
        flips && esc.status == TightnessStatus::Escaping && moment_ok && tight.status == TightnessStatus::Tight && min_mass >= 0.99,
        format!(
            "verdict flip at ln 2: {flips}; a=0.5 {:?}, m_0.1 log-slope {slope:.4} ± {slope_se:.4} vs c_0.1 {c:.4}; a=1.0 {:?}, min mass on [0,8] {min_mass:.4}",
            esc.status, tight.status
        ),
    )
}

/// Convergence of disjoint initial densities on bounded domains.
fn bounded_stability() -> Outcome {
    let m = 10.0;
    let space = PhaseSpace::Interval { m };
    let models = [
        ("B", ModelSpec::new(FlowModel::linear(1.0).with_domain(space), BoostMap::saturating(m, 0.5), 1.0).unwrap()),
        (
            "B'",
            ModelSpec::new(FlowModel::linear(1.0).with_domain(space), BoostMap::plateau(6.0, m, "(x + 10)/2").unwrap(), 1.0)
                .unwrap(),
        ),
    ];
    let grid = Grid::new(m, 1000).unwrap();
    let times: Vec<f64> = (0..=8).map(|k| 5.0 * k as f64).collect();
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, model) in &models {
        let a = build_generator(model, &grid).unwrap();
        let f = evolve_checkpoints(&a, &DensityVector::uniform(grid, 0.0, 1.0).unwrap(), &times).unwrap();
        let g = evolve_checkpoints(&a, &DensityVector::uniform(grid, 8.0, 9.0).unwrap(), &times).unwrap();
        let drift = f
            .iter()
            .chain(&g)
            .map(|d| (d.total_mass() - 1.0).abs())
            .fold(0.0f64, f64::max);
        let tv = total_variation(f.last().unwrap(), g.last().unwrap()).unwrap();
        let s = stationary_density(&a).unwrap();
        let n = grid.n_cells();
        let min_interior = s.density.values()[1..n - 1].iter().copied().fold(f64::INFINITY, f64::min);
        ok &= tv <= 0.01 && drift <= 1e-8 && min_interior > 0.0;
        lines.push(format!("{name}: TV(40) {tv:.2e}, mass drift {drift:.1e}, min f* {min_interior:.2e}"));
    }
    check(ok, lines.join("; "))
}

/// Nonnegativity and the discrete resolvent identity.
fn resolvent() -> Outcome {
    let m = 10.0;
    let model = ModelSpec::new(
        FlowModel::linear(1.0).with_domain(PhaseSpace::Interval { m }),
        BoostMap::plateau(6.0, m, "(x + 10)/2").unwrap(),
        1.0,
    )
    .unwrap();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for n in [200, 400, 1000] {
        let grid = Grid::new(m, n).unwrap();
        let fs = [
            DensityVector::from_fn(grid, |x| (std::f64::consts::PI * x / m).sin().powi(2)).unwrap(),
            DensityVector::uniform(grid, 0.0, m).unwrap(),
        ];
        for f in &fs {
            for lam in [0.5, 1.0, 5.0] {
                let r = resolvent_a0(&model, &grid, lam, f).unwrap();
                let err = resolvent_identity_error(&model, lam, f, &r).unwrap();
                ok &= r.values.iter().all(|v| *v >= 0.0) && r.boundary_mass >= 0.0 && err <= 5.0 / n as f64;
                worst = worst.max(err * n as f64);
            }
        }
    }
    check(ok, format!("nonnegative; max n·L1 error {worst:.2} (tol 5)"))
}

/// Identical config and seed give byte-identical CSV files.
fn reproducibility() -> Outcome {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        let out = format!("--output.directory={}", d.path().display());
        for cmd in ["simulate", "evolve"] {
            let code = run(["antibody-lab", cmd, "--sim.seed=31", "--sim.n_paths=50000", &out]);
            if code != 0 {
                return Err(format!("{cmd} exited with {code}"));
            }
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    let same = names
        .iter()
        .all(|n| std::fs::read(dirs[0].path().join(n)).ok() == std::fs::read(dirs[1].path().join(n)).ok());
    check(same && names.len() >= 5, format!("{} CSV files compared", names.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 flow Jacobian identity", flow_jacobian, Duration::from_secs(1)),
        ("2 ∂r/∂τ formula", reach_derivative, Duration::from_secs(5)),
        ("3 transition lower bound", transition_bound, Duration::from_secs(120)),
        ("4 minorization certificate", minorization, Duration::from_secs(120)),
        ("5 Monte Carlo vs density solver", mc_pde, Duration::from_secs(300)),
        ("6 stationary moments", stationary_moments, Duration::from_secs(120)),
        ("7 Dyson–Phillips structure", dyson_phillips_structure, Duration::from_secs(120)),
        ("8 phase boundary", phase_boundary, Duration::from_secs(600)),
        ("9 bounded-domain stability", bounded_stability, Duration::from_secs(300)),
        ("10 resolvent", resolvent, Duration::from_secs(60)),
        ("11 reproducibility", reproducibility, Duration::MAX),
    ];
    let mut failures = 0;
    for (name, run_criterion, limit) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run_criterion).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; runtime {elapsed:.1?} over limit")),
            Err(d) => (false, d),
        };
        failures += usize::from(!passed);
        println!("{} criterion {name}: {detail} [{elapsed:.2?}]", if passed { "PASS" } else { "FAIL" });
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
