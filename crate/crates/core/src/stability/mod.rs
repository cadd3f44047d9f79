//! Extended generator on test functions, drift conditions, and the
//! stable/sweeping classification.

mod lyapunov;
mod power_law;
mod tightness;
mod verdict;

pub use lyapunov::{check_drift, drift_samples, generator_apply, DriftReport, DriftStatus, LyapunovFunction};
pub use power_law::{
    classify_power_law, stable_exponent, sweeping_rate, PowerLawClassification, VerdictKind, DEFAULT_TOL, GAMMA_MAX,
};
pub use tightness::{empirical_tightness, TightnessReport, TightnessSettings, TightnessStatus};
pub use verdict::{fit_tails, foguel_verdict, foguel_verdict_with, Evidence, FoguelSettings, TailFit, Verdict};
