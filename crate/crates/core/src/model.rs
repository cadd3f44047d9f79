use serde::{Deserialize, Serialize};

use crate::boost::{AssumptionProfile, BoostMap};
use crate::error::{Error, Result};
use crate::flow::FlowModel;

/// Where the antibody concentration lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpace {
    HalfLine,
    Interval { m: f64 },
}

impl PhaseSpace {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            PhaseSpace::HalfLine => x >= 0.0 && x.is_finite(),
            PhaseSpace::Interval { m } => (0.0..=*m).contains(&x),
        }
    }

    pub fn upper(&self) -> Option<f64> {
        match self {
            PhaseSpace::HalfLine => None,
            PhaseSpace::Interval { m } => Some(*m),
        }
    }
}

/// Waning flow, boost map and infection rate: the full process specification.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub flow: FlowModel,
    pub boost: BoostMap,
    pub lambda: f64,
}

impl ModelSpec {
    pub fn new(flow: FlowModel, boost: BoostMap, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("jump rate must be > 0, got {lambda}")));
        }
        let space = boost.phase_space();
        if flow.domain() != space {
            return Err(Error::InvalidInput(format!(
                "flow domain {:?} does not match boost phase space {space:?}",
                flow.domain()
            )));
        }
        let consistent = matches!(
            (boost.profile(), space),
            (AssumptionProfile::A, PhaseSpace::HalfLine)
                | (AssumptionProfile::B | AssumptionProfile::BPrime, PhaseSpace::Interval { .. })
        );
        if !consistent {
            return Err(Error::InvalidInput(format!(
                "profile {:?} is inconsistent with phase space {space:?}",
                boost.profile()
            )));
        }
        Ok(Self { flow, boost, lambda })
    }

    pub fn phase_space(&self) -> PhaseSpace {
        self.boost.phase_space()
    }

    /// Shot-noise model `g = -a x`, `Q = x + l` on the half-line.
    pub fn shot_noise(a: f64, l: f64, lambda: f64) -> Result<Self> {
        Self::new(FlowModel::linear(a), BoostMap::additive(l), lambda)
    }

    /// Multiplicative model `g = -a x`, `Q = b x + c` on the half-line.
    pub fn affine(a: f64, b: f64, c: f64, lambda: f64) -> Result<Self> {
        Self::new(FlowModel::linear(a), BoostMap::affine(b, c), lambda)
    }

    /// Checks both ingredients against their assumption profile.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for c in self.flow.validate().failures() {
            problems.push(format!("flow: {} ({})", c.name, c.detail));
        }
        for c in self.boost.validate(self.boost.profile()).failures() {
            problems.push(format!("boost: {} ({})", c.name, c.detail));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }
}
