//! Densities on a grid and the solvers acting on them.

mod dyson;
mod evolve;
mod generator;
mod grid;
mod resolvent;
mod stationary;

pub use dyson::{dyson_phillips, dyson_phillips_with, poisson_tail, terms_for_tail, DysonPhillips, DEFAULT_QUAD_INTERVALS};
pub use evolve::{evolve, evolve_checkpoints};
pub use generator::{build_generator, build_generator_with, CflInfo, GeneratorMatrix, GeneratorMode, SolverSettings};
pub use grid::{total_variation, DensityVector, Grid};
pub use resolvent::{resolvent_a0, resolvent_identity_error, ResolventOutput};
pub use stationary::{stationary_density, StationaryDensity};
