//! The waning field `x' = g(x)` and its flow `π_t`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::expr::Expr;
use crate::model::PhaseSpace;
use crate::ode::{self, OdeOutcome, Tolerances};
use crate::validation::{log_samples, ValidationReport};

/// Default ceiling above which a backward solution counts as blown up.
pub const DEFAULT_BACKWARD_CEILING: f64 = 1e12;

const ODE_TOL: Tolerances = Tolerances {
    abs: 1e-10,
    rel: 1e-8,
};

/// Closed-form decay families plus an expression-backed fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowFamily {
    /// `g(x) = -a x`
    LinearDecay { a: f64 },
    /// `g(x) = -a x^p`, `p > 1`
    PowerDecay { a: f64, p: f64 },
    /// Arbitrary `g`; `dg` defaults to the symbolic derivative of `g`.
    Custom {
        g: Expr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dg: Option<Expr>,
    },
}

/// Result of running the flow backwards in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backward {
    Reached(f64),
    /// The backward solution blows up or leaves the phase space first.
    NotReachable,
}

impl Backward {
    pub fn value(self) -> Option<f64> {
        match self {
            Backward::Reached(y) => Some(y),
            Backward::NotReachable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    family: FlowFamily,
    domain: PhaseSpace,
    dg: Option<Expr>,
    backward_ceiling: f64,
}

impl FlowModel {
    pub fn new(family: FlowFamily, domain: PhaseSpace) -> Self {
        let dg = match &family {
            FlowFamily::Custom { g, dg } => Some(dg.clone().unwrap_or_else(|| g.derivative())),
            _ => None,
        };
        Self {
            family,
            domain,
            dg,
            backward_ceiling: DEFAULT_BACKWARD_CEILING,
        }
    }

    pub fn linear(a: f64) -> Self {
        Self::new(FlowFamily::LinearDecay { a }, PhaseSpace::HalfLine)
    }

    pub fn power(a: f64, p: f64) -> Self {
        Self::new(FlowFamily::PowerDecay { a, p }, PhaseSpace::HalfLine)
    }

    pub fn custom(g: &str) -> Result<Self> {
        Ok(Self::new(
            FlowFamily::Custom {
                g: Expr::parse(g)?,
                dg: None,
            },
            PhaseSpace::HalfLine,
        ))
    }

    pub fn with_domain(mut self, domain: PhaseSpace) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_backward_ceiling(mut self, ceiling: f64) -> Self {
        self.backward_ceiling = ceiling;
        self
    }

    pub fn family(&self) -> &FlowFamily {
        &self.family
    }

    pub fn domain(&self) -> PhaseSpace {
        self.domain
    }

    pub fn g(&self, x: f64) -> f64 {
        match &self.family {
            FlowFamily::LinearDecay { a } => -a * x,
            FlowFamily::PowerDecay { a, p } => -a * x.powf(*p),
            FlowFamily::Custom { g, .. } => g.eval(x),
        }
    }

    pub fn dg(&self, x: f64) -> f64 {
        match &self.family {
            FlowFamily::LinearDecay { a } => -a,
            FlowFamily::PowerDecay { a, p } => -a * p * x.powf(p - 1.0),
            FlowFamily::Custom { .. } => self.dg.as_ref().expect("custom flow has dg").eval(x),
        }
    }

    /// `π_t x0`, the state reached from `x0` after waning for time `t`.
    pub fn advance(&self, x0: f64, t: f64) -> Result<f64> {
        ensure_finite("x0", x0)?;
        ensure_finite("t", t)?;
        if x0 < 0.0 || t < 0.0 {
            return Err(Error::InvalidInput(format!(
                "advance needs x0 >= 0 and t >= 0, got x0={x0}, t={t}"
            )));
        }
        Ok(self.advance_unchecked(x0, t))
    }

    pub(crate) fn advance_unchecked(&self, x0: f64, t: f64) -> f64 {
        if t == 0.0 || x0 == 0.0 {
            return x0;
        }
        match &self.family {
            FlowFamily::LinearDecay { a } => x0 * (-a * t).exp(),
            FlowFamily::PowerDecay { a, p } => {
                if *p == 2.0 {
                    x0 / (1.0 + a * t * x0)
                } else {
                    let q = p - 1.0;
                    (x0.powf(-q) + a * q * t).powf(-1.0 / q)
                }
            }
            FlowFamily::Custom { g, .. } => {
                match ode::integrate(|y| g.eval(y), x0, t, ODE_TOL, f64::INFINITY) {
                    OdeOutcome::Reached(y) => y.clamp(0.0, x0),
                    // forward decay cannot blow up; stepping collapsed at the fixed point
                    OdeOutcome::Escaped => 0.0,
                }
            }
        }
    }

    /// `π_{-t} x`, or `NotReachable` when no state of the phase space flows to `x` in time `t`.
    pub fn advance_back(&self, x: f64, t: f64) -> Result<Backward> {
        ensure_finite("x", x)?;
        ensure_finite("t", t)?;
        if x < 0.0 || t < 0.0 {
            return Err(Error::InvalidInput(format!(
                "advance_back needs x >= 0 and t >= 0, got x={x}, t={t}"
            )));
        }
        Ok(self.advance_back_unchecked(x, t))
    }

    pub(crate) fn advance_back_unchecked(&self, x: f64, t: f64) -> Backward {
        if t == 0.0 || x == 0.0 {
            return Backward::Reached(x);
        }
        let ceiling = match self.domain {
            PhaseSpace::HalfLine => self.backward_ceiling,
            PhaseSpace::Interval { m } => m * (1.0 + 1e-12),
        };
        let y = match &self.family {
            FlowFamily::LinearDecay { a } => x * (a * t).exp(),
            FlowFamily::PowerDecay { a, p } => {
                let q = p - 1.0;
                let base = x.powf(-q) - a * q * t;
                if base <= 0.0 {
                    return Backward::NotReachable;
                }
                base.powf(-1.0 / q)
            }
            FlowFamily::Custom { g, .. } => {
                match ode::integrate(|y| -g.eval(y), x, t, ODE_TOL, ceiling) {
                    OdeOutcome::Reached(y) => y,
                    OdeOutcome::Escaped => return Backward::NotReachable,
                }
            }
        };
        if y.is_finite() && y <= ceiling {
            Backward::Reached(y)
        } else {
            Backward::NotReachable
        }
    }

    /// `∂(π_t x)/∂x = g(π_t x) / g(x)`.
    pub fn flow_jacobian(&self, x: f64, t: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        ensure_finite("t", t)?;
        if x <= 0.0 {
            return Err(Error::Domain(format!(
                "flow Jacobian is 0/0 at x = 0 (got x={x})"
            )));
        }
        if t < 0.0 {
            return Err(Error::InvalidInput(format!("t must be >= 0, got {t}")));
        }
        let gx = self.g(x);
        if gx == 0.0 {
            return Err(Error::Domain(format!("g vanishes at x={x}")));
        }
        Ok(self.g(self.advance_unchecked(x, t)) / gx)
    }

    /// Samples the decay assumptions: `g(0) = 0`, `g < 0` on `(0, upper]`,
    /// and agreement of the supplied derivative with central differences.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        match &self.family {
            FlowFamily::LinearDecay { a } => {
                report.push_bool("parameters", *a > 0.0 && a.is_finite(), format!("a={a}"))
            }
            FlowFamily::PowerDecay { a, p } => report.push_bool(
                "parameters",
                *a > 0.0 && *p > 1.0 && a.is_finite() && p.is_finite(),
                format!("a={a}, p={p}"),
            ),
            FlowFamily::Custom { .. } => {}
        }

        let g0 = self.g(0.0);
        report.push(
            "g(0)=0",
            (g0.abs() > 1e-12 || !g0.is_finite()).then_some(0.0),
            format!("g(0)={g0}"),
        );

        let upper = match self.domain {
            PhaseSpace::HalfLine => 1e3,
            PhaseSpace::Interval { m } => m,
        };
        let samples = log_samples(upper * 1e-6, upper, 200);
        let bad = samples
            .iter()
            .copied()
            .find(|&x| !(self.g(x) < 0.0 && self.g(x).is_finite()));
        report.push(
            "g(x)<0",
            bad,
            match bad {
                Some(x) => format!("g({x})={}", self.g(x)),
                None => format!("sampled {} points in (0, {upper}]", samples.len()),
            },
        );

        let bad = samples.iter().copied().find(|&x| {
            let h = 1e-5 * x.max(1e-3);
            let fd = (self.g(x + h) - self.g(x - h)) / (2.0 * h);
            let d = self.dg(x);
            (d - fd).abs() > 1e-4 * d.abs().max(fd.abs()).max(1e-6)
        });
        report.push(
            "g is C1",
            bad,
            match bad {
                Some(x) => format!("g'({x}) disagrees with finite differences"),
                None => "derivative matches central differences".into(),
            },
        );
        report
    }
}
