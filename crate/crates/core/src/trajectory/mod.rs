//! Exact simulation of the jump process and path-based estimators.

mod ensemble;
mod path;
mod reach;

pub use ensemble::{
    ensemble_histogram, ensemble_states, ergodic_average, jump_counts, negative_moment_series, simulate_paths, transition_probability,
    ErgodicEstimate, Estimate, HistogramEstimate, InitialDistribution, Observable,
};
pub use path::{path_rng, simulate_trajectory, TrajectoryPath};
pub use reach::{
    reach, reach_dtau, transition_lower_bound, verify_minorization, Interval, Minorization, MinorizationCertificate,
};
pub(crate) use ensemble::histogram;
