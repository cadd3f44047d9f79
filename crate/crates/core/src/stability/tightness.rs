use serde::{Deserialize, Serialize};

use crate::density::{build_generator_with, evolve_checkpoints, DensityVector, Grid, SolverSettings};
use crate::error::{ensure_finite, Error, Result};
use crate::model::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessSettings {
    /// Mass floor for a tight compact.
    pub kappa: f64,
    /// Checkpoints as fractions of the horizon.
    pub checkpoint_fractions: Vec<f64>,
    /// Right ends `F` of the compacta `[0, F]`; defaults to quarter, half and full grid.
    pub compacta: Option<Vec<f64>>,
    /// Shorter horizons give `Inconclusive`.
    pub min_horizon: f64,
    /// Allowed increase between checkpoints still counted as non-increasing.
    pub monotone_slack: f64,
}

impl Default for TightnessSettings {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            checkpoint_fractions: vec![0.25, 0.5, 0.75, 1.0],
            compacta: None,
            min_horizon: 1.0,
            monotone_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TightnessStatus {
    Tight,
    Escaping,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub kappa: f64,
    pub times: Vec<f64>,
    pub compacta: Vec<f64>,
    /// `mass[k][j]`: mass on `[0, compacta[k]]` at `times[j]`.
    pub mass: Vec<Vec<f64>>,
    /// Mass that left the grid by each checkpoint.
    pub escaped: Vec<f64>,
    pub status: TightnessStatus,
}

impl TightnessReport {
    pub fn mass_on(&self, upper: f64) -> Option<&[f64]> {
        self.compacta.iter().position(|&f| f == upper).map(|k| self.mass[k].as_slice())
    }
}

/// Tracks the mass of `U(t) f0` on nested compacta `[0, F]` over `[0, horizon]`.
pub fn empirical_tightness(
    model: &ModelSpec,
    grid: &Grid,
    f0: &DensityVector,
    horizon: f64,
    settings: &TightnessSettings,
) -> Result<TightnessReport> {
    ensure_finite("horizon", horizon)?;
    if !(settings.kappa > 0.0 && settings.kappa <= 1.0) {
        return Err(Error::InvalidInput(format!("kappa must be in (0, 1], got {}", settings.kappa)));
    }
    let fr = &settings.checkpoint_fractions;
    if fr.is_empty() || fr.windows(2).any(|w| w[1] <= w[0]) || fr.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
        return Err(Error::InvalidInput("checkpoint fractions must be increasing in (0, 1]".into()));
    }
    let compacta = match &settings.compacta {
        Some(c) => c.clone(),
        None => {
            let x = grid.x_max();
            vec![x / 4.0, x / 2.0, x]
        }
    };
    if compacta.is_empty() || compacta.iter().any(|f| !(*f > 0.0 && *f <= grid.x_max())) {
        return Err(Error::InvalidInput("compacta must lie in (0, x_max]".into()));
    }
    let times: Vec<f64> = fr.iter().map(|s| s * horizon.max(0.0)).collect();
    if horizon < settings.min_horizon {
        return Ok(TightnessReport {
            kappa: settings.kappa,
            times,
            compacta: compacta.clone(),
            mass: vec![Vec::new(); compacta.len()],
            escaped: Vec::new(),
            status: TightnessStatus::Inconclusive,
        });
    }
    let a = build_generator_with(model, grid, SolverSettings::default())?;
    let snaps = evolve_checkpoints(&a, f0, &times)?;
    let mass: Vec<Vec<f64>> = compacta
        .iter()
        .map(|&f| snaps.iter().map(|s| s.mass_below(f)).collect())
        .collect();
    let escaped = snaps.iter().map(|s| s.escaped_mass()).collect();
    let kappa = settings.kappa;
    let tight = mass.iter().any(|m| m.iter().all(|v| *v >= kappa));
    let escaping = mass.iter().all(|m| {
        m.windows(2).all(|w| w[1] <= w[0] + settings.monotone_slack) && *m.last().unwrap() < kappa
    });
    let status = if tight {
        TightnessStatus::Tight
    } else if escaping {
        TightnessStatus::Escaping
    } else {
        TightnessStatus::Inconclusive
    };
    Ok(TightnessReport {
        kappa,
        times,
        compacta,
        mass,
        escaped,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_model_keeps_mass() {
        let model = ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(16.0, 400).unwrap();
        let f0 = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
        let settings = TightnessSettings {
            compacta: Some(vec![8.0]),
            ..Default::default()
        };
        let rep = empirical_tightness(&model, &grid, &f0, 20.0, &settings).unwrap();
        assert_eq!(rep.status, TightnessStatus::Tight);
        assert!(rep.mass_on(8.0).unwrap().iter().all(|m| *m >= 0.99));
    }

    #[test]
    fn pure_decay_limit_is_tight() {
        let model = ModelSpec::shot_noise(1.0, 1.0, 1e-6).unwrap();
        let grid = Grid::new(4.0, 200).unwrap();
        let f0 = DensityVector::uniform(grid, 2.0, 3.0).unwrap();
        let rep = empirical_tightness(&model, &grid, &f0, 10.0, &TightnessSettings::default()).unwrap();
        assert_eq!(rep.status, TightnessStatus::Tight);
        // mass collapses toward 0 and stays in the smallest compact
        assert!(rep.mass[0].last().unwrap() > &0.999);
    }

    #[test]
    fn sweeping_model_escapes() {
        let model = ModelSpec::affine(0.5, 2.0, 0.1, 1.0).unwrap();
        let grid = Grid::new(100.0, 400).unwrap();
        let f0 = DensityVector::uniform(grid, 0.5, 1.5).unwrap();
        let rep = empirical_tightness(&model, &grid, &f0, 100.0, &TightnessSettings::default()).unwrap();
        assert_eq!(rep.status, TightnessStatus::Escaping, "{:?}", rep.mass);
        let full = rep.mass_on(100.0).unwrap();
        assert!(full.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn short_horizon_is_inconclusive() {
        let model = ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(8.0, 100).unwrap();
        let f0 = DensityVector::uniform(grid, 0.0, 1.0).unwrap();
        let rep = empirical_tightness(&model, &grid, &f0, 0.5, &TightnessSettings::default()).unwrap();
        assert_eq!(rep.status, TightnessStatus::Inconclusive);
    }
}
