use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::expr::Expr;
use crate::model::ModelSpec;
use crate::validation::{log_samples, ValidationReport};

/// Test function `V ≥ 0` for the drift conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LyapunovFunction {
    /// `V(x) = x`
    Identity,
    /// `V(x) = x^γ`
    Power { gamma: f64 },
    Custom {
        v: Expr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dv: Option<Expr>,
    },
}

impl LyapunovFunction {
    pub fn custom(v: &str) -> Result<Self> {
        Ok(LyapunovFunction::Custom { v: Expr::parse(v)?, dv: None })
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            LyapunovFunction::Identity => x,
            LyapunovFunction::Power { gamma } => x.powf(*gamma),
            LyapunovFunction::Custom { v, .. } => v.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            LyapunovFunction::Identity => 1.0,
            LyapunovFunction::Power { gamma } => gamma * x.powf(gamma - 1.0),
            LyapunovFunction::Custom { v, dv } => match dv {
                Some(d) => d.eval(x),
                None => v.derivative().eval(x),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            LyapunovFunction::Identity => "x".into(),
            LyapunovFunction::Power { gamma } => format!("x^{gamma}"),
            LyapunovFunction::Custom { v, .. } => v.source().to_string(),
        }
    }

    /// Samples `V ≥ 0` and agreement of `V'` with central differences on `[0, upper]`.
    pub fn validate(&self, upper: f64) -> ValidationReport {
        let mut report = ValidationReport::default();
        if let LyapunovFunction::Power { gamma } = self {
            report.push_bool("parameters", *gamma > 0.0 && gamma.is_finite(), format!("gamma={gamma}"));
        }
        let mut xs = vec![0.0];
        xs.extend(log_samples(upper * 1e-6, upper, 200));
        let neg = xs.iter().copied().find(|&x| !(self.value(x) >= 0.0));
        report.push("V>=0", neg, "V is nonnegative at sampled points");
        let bad = xs.iter().copied().filter(|&x| x > 0.0).find(|&x| {
            let h = 1e-6 * x.max(1e-3);
            let fd = (self.value(x + h) - self.value((x - h).max(0.0))) / (x + h - (x - h).max(0.0));
            let d = self.derivative(x);
            !((fd - d).abs() <= 1e-4 * d.abs().max(1.0))
        });
        report.push("V is C1", bad, "V' agrees with central differences");
        report
    }

    fn drift_term(&self, model: &ModelSpec, x: f64) -> f64 {
        let g = model.flow.g(x);
        // g(0) = 0 absorbs a singular V'(0)
        if g == 0.0 {
            0.0
        } else {
            g * self.derivative(x)
        }
    }
}

/// `ℒV(x) = g(x) V'(x) + Λ V(Q(x)) - Λ V(x)`.
pub fn generator_apply(model: &ModelSpec, v: &LyapunovFunction, x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    if !model.phase_space().contains(x) {
        return Err(Error::InvalidInput(format!("x={x} outside the phase space")));
    }
    Ok(generator_apply_unchecked(model, v, x))
}

pub(crate) fn generator_apply_unchecked(model: &ModelSpec, v: &LyapunovFunction, x: f64) -> f64 {
    let lam = model.lambda;
    v.drift_term(model, x) + lam * (v.value(model.boost.q(x)) - v.value(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftStatus {
    Satisfied,
    Violated,
    /// `ℒV` changes sign over the largest sampled decade.
    Inconclusive,
}

/// Sampled check of `ℒV ≤ M̄` on `[0, r)` and `ℒV ≤ -ε` on `[r, X]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub lyapunov: String,
    pub r: f64,
    pub m_bar: f64,
    /// `-sup ℒV` over the sampled `[r, X]`.
    pub epsilon: f64,
    pub satisfied: bool,
    pub status: DriftStatus,
    /// `ℒV` at the largest sample.
    pub limsup_estimate: f64,
}

/// Uniform samples on `[0, r]` followed by log-spaced samples up to `x_big`.
pub fn drift_samples(r: f64, x_big: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=100).map(|k| r * k as f64 / 100.0).collect();
    xs.extend(log_samples(r.max(1e-9), x_big, 400));
    xs
}

pub fn check_drift(model: &ModelSpec, v: &LyapunovFunction, r: f64, x_samples: &[f64]) -> Result<DriftReport> {
    ensure_finite("r", r)?;
    let x_big = x_samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x_samples.is_empty() || !(x_big > r) || r < 0.0 {
        return Err(Error::InvalidInput(format!("samples must extend past r={r}")));
    }
    let mut m_bar = f64::NEG_INFINITY;
    let mut sup_far = f64::NEG_INFINITY;
    let (mut tail_pos, mut tail_neg) = (false, false);
    let mut limsup = f64::NAN;
    for &x in x_samples {
        let lv = generator_apply(model, v, x)?;
        if !lv.is_finite() {
            return Err(Error::Domain(format!("ℒV is not finite at x={x}")));
        }
        if x < r {
            m_bar = m_bar.max(lv);
        } else {
            sup_far = sup_far.max(lv);
        }
        if x >= x_big / 10.0 {
            if lv < 0.0 {
                tail_neg = true;
            } else {
                tail_pos = true;
            }
        }
        if x == x_big {
            limsup = lv;
        }
    }
    let epsilon = -sup_far;
    let status = if tail_pos && tail_neg {
        DriftStatus::Inconclusive
    } else if epsilon > 0.0 && tail_neg {
        DriftStatus::Satisfied
    } else {
        DriftStatus::Violated
    };
    Ok(DriftReport {
        lyapunov: v.label(),
        r,
        m_bar: m_bar.max(0.0),
        epsilon,
        satisfied: status == DriftStatus::Satisfied,
        status,
        limsup_estimate: limsup,
    })
}
