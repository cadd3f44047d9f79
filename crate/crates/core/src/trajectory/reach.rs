//! States reachable with exactly one jump, `r(τ, t, x) = π_τ Q(π_{t-τ} x)`,
//! and the transition bounds they give.

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::model::ModelSpec;

const TAU_GRID: usize = 256;
const BISECT_TOL: f64 = 1e-10;

fn check_times(tau: f64, t: f64) -> Result<()> {
    ensure_finite("tau", tau)?;
    ensure_finite("t", t)?;
    if !(0.0 <= tau && tau <= t) {
        return Err(Error::InvalidInput(format!("need 0 <= tau <= t, got tau={tau}, t={t}")));
    }
    Ok(())
}

/// State at `t` of the path that jumps once, `τ` time units before `t`.
pub fn reach(model: &ModelSpec, tau: f64, t: f64, x: f64) -> Result<f64> {
    check_times(tau, t)?;
    super::path::check_start(model, x)?;
    Ok(reach_unchecked(model, tau, t, x))
}

fn reach_unchecked(model: &ModelSpec, tau: f64, t: f64, x: f64) -> f64 {
    let flow = &model.flow;
    flow.advance_unchecked(model.boost.q(flow.advance_unchecked(x, t - tau)), tau)
}

/// `∂r/∂τ = g(r) - g(r)/g(Q(z)) · Q'(z) g(z)` with `z = π_{t-τ} x`.
pub fn reach_dtau(model: &ModelSpec, tau: f64, t: f64, x: f64) -> Result<f64> {
    check_times(tau, t)?;
    super::path::check_start(model, x)?;
    if x <= 0.0 {
        return Err(Error::InvalidInput(format!("reach_dtau needs x > 0, got {x}")));
    }
    let flow = &model.flow;
    let z = flow.advance_unchecked(x, t - tau);
    let y = model.boost.q(z);
    let gy = flow.g(y);
    if gy == 0.0 {
        return Err(Error::Domain(format!("g vanishes at Q(π_(t-τ) x) = {y}")));
    }
    let r = flow.advance_unchecked(y, tau);
    let gr = flow.g(r);
    Ok(gr - gr / gy * model.boost.derivative(z) * flow.g(z))
}

/// Closed interval of states, possibly unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || lo.is_nan() {
            return Err(Error::InvalidInput(format!("interval needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

fn bisect<F: Fn(f64) -> f64>(h: F, mut a: f64, mut b: f64) -> f64 {
    let mut ha = h(a);
    while b - a > BISECT_TOL {
        let m = 0.5 * (a + b);
        let hm = h(m);
        if (hm > 0.0) == (ha > 0.0) {
            a = m;
            ha = hm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Lebesgue measure of `{τ ∈ [0, t] : r(τ, t, x) ∈ Γ}`.
fn hitting_measure(model: &ModelSpec, x: f64, t: f64, gamma: Interval) -> f64 {
    let r = |tau: f64| reach_unchecked(model, tau, t, x);
    let taus: Vec<f64> = (0..=TAU_GRID).map(|k| t * k as f64 / TAU_GRID as f64).collect();
    let values: Vec<f64> = taus.iter().map(|&s| r(s)).collect();
    let mut breaks = vec![0.0, t];
    for edge in [gamma.lo, gamma.hi] {
        if !edge.is_finite() {
            continue;
        }
        for k in 0..TAU_GRID {
            let (u, v) = (values[k] - edge, values[k + 1] - edge);
            if u == 0.0 {
                breaks.push(taus[k]);
            } else if u * v < 0.0 {
                breaks.push(bisect(|s| r(s) - edge, taus[k], taus[k + 1]));
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0] && gamma.contains(r(0.5 * (w[0] + w[1]))))
        .map(|w| w[1] - w[0])
        .sum()
}

/// `Λ e^{-Λt} |{τ : r(τ, t, x) ∈ Γ}|`, a lower bound for `P(t, x, Γ)` from one-jump paths.
pub fn transition_lower_bound(model: &ModelSpec, x: f64, t: f64, gamma: Interval) -> Result<f64> {
    super::path::check_start(model, x)?;
    ensure_finite("t", t)?;
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let lam = model.lambda;
    Ok(lam * (-lam * t).exp() * hitting_measure(model, x, t, gamma))
}

/// A common interval `Δ` and level `η̄` with `P(t, x, ·) ≥ η̄ 1_Δ` for `x` in the ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorizationCertificate {
    pub x0: f64,
    pub t: f64,
    pub radius: f64,
    pub delta_interval: Interval,
    pub level: f64,
    /// `-∂r/∂τ ≥ δ` on `[0, τ₀] ×` ball.
    pub delta: f64,
    pub tau0: f64,
    /// `-∂r/∂τ ≤ M̄` on the same set.
    pub slope_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Minorization {
    Certificate(MinorizationCertificate),
    Failure { reason: String },
}

const BALL_SAMPLES: usize = 33;
const SLOPE_MARGIN: f64 = 0.05;

/// Follows the construction of condition (K): bound `∂r/∂τ` between `-M̄` and
/// `-δ` on `[0, τ₀]` for `x` near `x0`, then intersect the one-jump image intervals.
///
/// The slope bounds are taken over a 256-point `τ` grid and 33 points of the
/// ball and widened by 5% on each side.
pub fn verify_minorization(model: &ModelSpec, x0: f64, t: f64, radius: f64) -> Result<Minorization> {
    super::path::check_start(model, x0)?;
    if x0 <= 0.0 || !(t > 0.0 && t.is_finite()) || !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need x0 > 0, t > 0 and radius >= 0, got x0={x0}, t={t}, radius={radius}"
        )));
    }
    let upper = model.phase_space().upper().unwrap_or(f64::INFINITY);
    let lo = (x0 - radius).max(0.0);
    let hi = (x0 + radius).min(upper);
    if lo <= 0.0 {
        return Ok(Minorization::Failure {
            reason: format!("ball around {x0} with radius {radius} reaches 0"),
        });
    }
    let ball: Vec<f64> = if radius == 0.0 {
        vec![x0]
    } else {
        (0..BALL_SAMPLES)
            .map(|k| lo + (hi - lo) * k as f64 / (BALL_SAMPLES - 1) as f64)
            .collect()
    };
    let taus: Vec<f64> = (0..=TAU_GRID).map(|k| t * k as f64 / TAU_GRID as f64).collect();
    // worst slopes over the ball at each τ
    let mut steepest = vec![0.0f64; taus.len()];
    let mut flattest = vec![f64::INFINITY; taus.len()];
    for &x in &ball {
        for (k, &tau) in taus.iter().enumerate() {
            let s = -reach_dtau(model, tau, t, x)?;
            steepest[k] = steepest[k].max(s);
            flattest[k] = flattest[k].min(s);
        }
    }
    // τ₀ maximizing the guaranteed length δ τ₀
    let mut best: Option<(f64, f64, f64)> = None;
    let (mut run_min, mut run_max) = (f64::INFINITY, 0.0f64);
    for k in 0..taus.len() {
        run_min = run_min.min(flattest[k]);
        run_max = run_max.max(steepest[k]);
        if !(run_min > 0.0) {
            break;
        }
        let delta = run_min * (1.0 - SLOPE_MARGIN);
        if k > 0 && best.is_none_or(|(d, tau0, _)| delta * taus[k] > d * tau0) {
            best = Some((delta, taus[k], run_max * (1.0 + SLOPE_MARGIN)));
        }
    }
    let Some((delta, tau0, slope_bound)) = best else {
        return Ok(Minorization::Failure {
            reason: "∂r/∂τ is not negative near τ = 0 on the ball".into(),
        });
    };
    let bottom = ball
        .iter()
        .map(|&x| reach_unchecked(model, tau0, t, x))
        .fold(f64::NEG_INFINITY, f64::max);
    let top = ball
        .iter()
        .map(|&x| reach_unchecked(model, 0.0, t, x))
        .fold(f64::INFINITY, f64::min);
    let needed = delta * tau0 / 3.0;
    if top - bottom < needed {
        return Ok(Minorization::Failure {
            reason: format!(
                "common interval has length {:.3e} < δτ₀/3 = {needed:.3e}; shrink the ball",
                (top - bottom).max(0.0)
            ),
        });
    }
    let lam = model.lambda;
    Ok(Minorization::Certificate(MinorizationCertificate {
        x0,
        t,
        radius,
        delta_interval: Interval { lo: bottom, hi: top },
        level: lam * (-lam * t).exp() / slope_bound,
        delta,
        tau0,
        slope_bound,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::BoostMap;
    use crate::flow::FlowModel;
    use crate::trajectory::transition_probability;

    fn shot() -> ModelSpec {
        ModelSpec::shot_noise(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn reach_examples() {
        let m = shot();
        assert!((reach(&m, 0.5, 1.0, 1.0).unwrap() - ((-0.5f64).exp() + 1.0) * (-0.5f64).exp()).abs() < 1e-15);
        assert!((reach(&m, 0.5, 1.0, 1.0).unwrap() - 0.9744).abs() < 1e-4);
        assert_eq!(reach(&m, 2.0, 2.0, 1.0).unwrap(), m.flow.advance(2.0, 2.0).unwrap());
        assert_eq!(reach(&m, 0.0, 2.0, 1.0).unwrap(), m.flow.advance(1.0, 2.0).unwrap() + 1.0);
        assert!(reach(&m, 3.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn dtau_simplifies_for_shot_noise() {
        let m = shot();
        for t in [0.1, 1.0, 10.0] {
            assert!((reach_dtau(&m, 0.0, t, 2.0).unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dtau_matches_finite_differences() {
        let models = [
            shot(),
            ModelSpec::new(FlowModel::power(1.0, 2.0), BoostMap::affine(1.5, 0.5), 1.0).unwrap(),
        ];
        for m in &models {
            for &(tau, t, x) in &[(0.3, 1.0, 0.7), (1.2, 2.0, 3.0), (0.05, 4.0, 0.2)] {
                let h = 1e-5;
                let fd = (reach(m, tau + h, t, x).unwrap() - reach(m, tau - h, t, x).unwrap()) / (2.0 * h);
                let exact = reach_dtau(m, tau, t, x).unwrap();
                assert!(((fd - exact) / exact).abs() < 1e-6, "{fd} {exact}");
            }
        }
    }

    #[test]
    fn lower_bound_examples() {
        let m = shot();
        let all = Interval::new(0.0, f64::INFINITY).unwrap();
        let b = transition_lower_bound(&m, 1.0, 2.0, all).unwrap();
        assert!((b - 2.0 * (-2.0f64).exp()).abs() < 1e-12);
        let far = Interval::new(50.0, 60.0).unwrap();
        assert_eq!(transition_lower_bound(&m, 1.0, 2.0, far).unwrap(), 0.0);
        // r(τ) = e^{-t} x + e^{-τ} is monotone: |{τ : r ∈ [a, b]}| = ln((b - c)/(a - c))
        let (x, t): (f64, f64) = (1.0, 2.0);
        let c = x * (-t).exp();
        let g = Interval::new(0.5, 0.9).unwrap();
        let expected = ((0.9 - c) / (0.5 - c)).ln() * (-t).exp();
        assert!((transition_lower_bound(&m, x, t, g).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_below_monte_carlo() {
        let m = shot();
        for (k, &(x, t, lo, hi)) in [(1.0, 2.0, 0.4, 0.8), (3.0, 1.0, 1.0, 2.0), (0.5, 4.0, 0.05, 0.6)].iter().enumerate() {
            let g = Interval::new(lo, hi).unwrap();
            let bound = transition_lower_bound(&m, x, t, g).unwrap();
            let (p, se) = transition_probability(&m, x, t, (lo, hi), 50_000, k as u64).unwrap();
            assert!(bound > 0.0 && p >= bound - 3.0 * se, "{p} {bound}");
        }
    }

    #[test]
    fn minorization_certificate() {
        let m = shot();
        let Minorization::Certificate(c) = verify_minorization(&m, 1.0, 2.0, 0.1).unwrap() else {
            panic!("expected a certificate");
        };
        assert!(c.delta_interval.len() >= c.delta * c.tau0 / 3.0);
        assert!(c.level > 0.0 && c.level <= m.lambda * (-2.0f64).exp() / c.delta);
        // zero radius: Δ is the single-point image interval
        let Minorization::Certificate(p) = verify_minorization(&m, 1.0, 2.0, 0.0).unwrap() else {
            panic!("expected a certificate");
        };
        let lo = reach(&m, p.tau0, 2.0, 1.0).unwrap();
        let hi = reach(&m, 0.0, 2.0, 1.0).unwrap();
        assert_eq!((p.delta_interval.lo, p.delta_interval.hi), (lo, hi));
    }

    #[test]
    fn minorization_failure_is_a_value() {
        let m = shot();
        assert!(matches!(verify_minorization(&m, 1.0, 2.0, 5.0).unwrap(), Minorization::Failure { .. }));
        assert!(matches!(verify_minorization(&m, 1.0, 2.0, 0.9).unwrap(), Minorization::Failure { .. } | Minorization::Certificate(_)));
    }
}
