use serde::{Deserialize, Serialize};

use super::lyapunov::{check_drift, drift_samples, generator_apply_unchecked, DriftReport, DriftStatus, LyapunovFunction};
use super::power_law::{classify_power_law, PowerLawClassification, VerdictKind};
use super::tightness::{empirical_tightness, TightnessReport, TightnessSettings, TightnessStatus};
use crate::density::{DensityVector, Grid};
use crate::error::Result;
use crate::model::{ModelSpec, PhaseSpace};
use crate::validation::log_samples;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoguelSettings {
    /// Relative tolerance of the power-law comparison.
    pub tol: f64,
    /// Tails are fitted over `[tail_x / 10, tail_x]`.
    pub tail_x: f64,
    /// Largest point of the drift scan.
    pub drift_x: f64,
    /// Exponents of the `x^γ` family tried besides `V = x` and the witness.
    pub gammas: Vec<f64>,
    pub horizon: f64,
    pub n_cells: usize,
    pub tightness: TightnessSettings,
}

impl Default for FoguelSettings {
    fn default() -> Self {
        Self {
            tol: super::power_law::DEFAULT_TOL,
            tail_x: 1e3,
            drift_x: 1e6,
            gammas: vec![0.05, 0.1, 0.25, 0.5, 1.0],
            horizon: 100.0,
            n_cells: 400,
            tightness: TightnessSettings::default(),
        }
    }
}

/// Eventual power-law bounds `g(x) ≈ -a x^p`, `Q(x) ≈ b x^q` fitted over the top decade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    /// Log-log slope of `-g`.
    pub decay_exponent: f64,
    /// Log-log slope of `Q`.
    pub boost_exponent: f64,
    /// Least-squares slope of `-g(x)` against `x`.
    pub a: f64,
    /// Least-squares slope of `Q(x)` against `x`.
    pub b: f64,
    pub classification: Option<PowerLawClassification>,
    pub supports: VerdictKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Evidence {
    Theorem { statement: String, supports: VerdictKind },
    TailFit(TailFit),
    Drift { reports: Vec<DriftReport>, supports: VerdictKind },
    Tightness { report: TightnessReport, supports: VerdictKind },
}

impl Evidence {
    pub fn supports(&self) -> VerdictKind {
        match self {
            Evidence::Theorem { supports, .. }
            | Evidence::Drift { supports, .. }
            | Evidence::Tightness { supports, .. } => *supports,
            Evidence::TailFit(fit) => fit.supports,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub verdict: VerdictKind,
    pub evidence: Vec<Evidence>,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits the tails of `g` and `Q` and classifies them.
pub fn fit_tails(model: &ModelSpec, tail_x: f64, tol: f64) -> Result<TailFit> {
    let xs = log_samples(tail_x / 10.0, tail_x, 64);
    let decay: Vec<f64> = xs.iter().map(|&x| -model.flow.g(x)).collect();
    let boost: Vec<f64> = xs.iter().map(|&x| model.boost.q(x)).collect();
    let logs = |v: &[f64]| v.iter().map(|y| y.max(f64::MIN_POSITIVE).ln()).collect::<Vec<_>>();
    let lx = logs(&xs);
    let p = slope(&lx, &logs(&decay));
    let q = slope(&lx, &logs(&boost));
    let a = slope(&xs, &decay);
    let b = slope(&xs, &boost);
    let mut classification = None;
    let supports = if q > 1.05 || decay.iter().any(|d| *d <= 0.0) {
        VerdictKind::Unknown
    } else if p > 1.05 {
        // superlinear decay dominates any linear boost
        VerdictKind::Stable
    } else if q < 0.95 {
        if p >= 0.95 { VerdictKind::Stable } else { VerdictKind::Unknown }
    } else if p < 0.95 {
        if b > 1.0 + 1e-3 { VerdictKind::Sweeping } else { VerdictKind::Unknown }
    } else {
        let c = classify_power_law(a.max(f64::MIN_POSITIVE), b.max(1.0), model.lambda, tol)?;
        classification = Some(c);
        c.verdict
    };
    Ok(TailFit {
        decay_exponent: p,
        boost_exponent: q,
        a,
        b,
        classification,
        supports,
    })
}

/// Runs the drift condition for `V` with `r` placed past the last sign change of `ℒV`.
fn drift_for(model: &ModelSpec, v: &LyapunovFunction, x_big: f64) -> Result<(DriftReport, Option<f64>)> {
    let scan = log_samples(1e-6, x_big, 600);
    let root = scan
        .iter()
        .rposition(|&x| generator_apply_unchecked(model, v, x) >= 0.0)
        .map(|k| scan.get(k + 1).copied())
        .unwrap_or(Some(scan[0]));
    let r = match root {
        Some(x) => (2.0 * x).min(x_big / 100.0),
        None => 1.0,
    };
    Ok((check_drift(model, v, r, &drift_samples(r, x_big))?, root))
}

/// Combined analytic and empirical stability verdict.
pub fn foguel_verdict(model: &ModelSpec) -> Result<Verdict> {
    foguel_verdict_with(model, &FoguelSettings::default())
}

pub fn foguel_verdict_with(model: &ModelSpec, settings: &FoguelSettings) -> Result<Verdict> {
    if let PhaseSpace::Interval { m } = model.phase_space() {
        return Ok(Verdict {
            verdict: VerdictKind::Stable,
            evidence: vec![Evidence::Theorem {
                statement: format!("bounded phase space [0, {m}]: the semigroup is asymptotically stable"),
                supports: VerdictKind::Stable,
            }],
        });
    }
    let fit = fit_tails(model, settings.tail_x, settings.tol)?;

    let mut family = vec![LyapunovFunction::Identity];
    if let Some(g) = fit
        .classification
        .filter(|c| c.verdict == VerdictKind::Stable)
        .and_then(|c| c.gamma_witness)
    {
        family.push(LyapunovFunction::Power { gamma: g });
    }
    family.extend(settings.gammas.iter().map(|&g| LyapunovFunction::Power { gamma: g }));
    let mut reports = Vec::with_capacity(family.len());
    let mut identity_root = None;
    for (k, v) in family.iter().enumerate() {
        let (rep, root) = drift_for(model, v, settings.drift_x)?;
        if k == 0 {
            identity_root = root;
        }
        reports.push(rep);
    }
    let drift_ok = reports.iter().any(|r| r.status == DriftStatus::Satisfied);
    let drift_supports = if drift_ok { VerdictKind::Stable } else { VerdictKind::Unknown };

    let x_max = identity_root.map_or(100.0, |r| (10.0 * r).clamp(10.0, 1000.0));
    let grid = Grid::new(x_max, settings.n_cells)?;
    let f0 = DensityVector::uniform(grid, 0.0, x_max / 20.0)?;
    let report = empirical_tightness(model, &grid, &f0, settings.horizon, &settings.tightness)?;
    let tight_supports = match report.status {
        TightnessStatus::Tight => VerdictKind::Stable,
        TightnessStatus::Escaping => VerdictKind::Sweeping,
        TightnessStatus::Inconclusive => VerdictKind::Unknown,
    };

    let analytic_stable = fit.supports == VerdictKind::Stable || drift_ok;
    let analytic_sweeping = fit.supports == VerdictKind::Sweeping && !drift_ok;
    let verdict = if analytic_stable && !analytic_sweeping && tight_supports == VerdictKind::Stable {
        VerdictKind::Stable
    } else if analytic_sweeping && tight_supports == VerdictKind::Sweeping {
        VerdictKind::Sweeping
    } else if fit.supports == VerdictKind::Boundary {
        VerdictKind::Boundary
    } else {
        VerdictKind::Unknown
    };
    Ok(Verdict {
        verdict,
        evidence: vec![
            Evidence::TailFit(fit),
            Evidence::Drift { reports, supports: drift_supports },
            Evidence::Tightness { report, supports: tight_supports },
        ],
    })
}
