//! Piecewise deterministic model of antibody levels: waning flow, boosting
//! at Poisson infection times, and the density semigroup they generate.

pub mod boost;
pub mod cli;
pub mod density;
pub mod error;
pub mod expr;
pub mod flow;
pub mod model;
pub mod stability;
mod ode;
mod quadrature;
pub mod trajectory;
pub mod validation;

pub use boost::{AssumptionProfile, BoostFamily, BoostMap, FpMatrix, PieceSpec};
pub use density::{DensityVector, Grid};
pub use error::{Error, Result};
pub use expr::Expr;
pub use flow::{Backward, FlowFamily, FlowModel};
pub use model::{ModelSpec, PhaseSpace};
pub use validation::{AssumptionCheck, ValidationReport};
