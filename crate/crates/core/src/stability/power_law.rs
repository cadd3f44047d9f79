use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Outcome of the stability classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Stable,
    Sweeping,
    /// `a` within tolerance of `Λ ln b`; neither branch applies.
    Boundary,
    Unknown,
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VerdictKind::Stable => "stable",
            VerdictKind::Sweeping => "sweeping",
            VerdictKind::Boundary => "boundary",
            VerdictKind::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Power-law comparison `g(x) ~ -a x`, `Q(x) ~ b x` against `a` vs `Λ ln b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawClassification {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub verdict: VerdictKind,
    /// `a - Λ ln b`
    pub margin: f64,
    /// Stable: minimizer of `-aγ + Λb^γ - Λ`; Sweeping: minimizer of `c_γ`.
    pub gamma_witness: Option<f64>,
    /// The minimized exponent at the witness (negative for both definite branches).
    pub witness_value: Option<f64>,
}

pub const GAMMA_MAX: f64 = 5.0;
pub const GAMMA_TOL: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-6;

/// `c_γ = γa + Λb^{-γ} - Λ`, the decay-rate bound of `E ξ_t^{-γ}`.
pub fn sweeping_rate(a: f64, b: f64, lambda: f64, gamma: f64) -> f64 {
    gamma * a + lambda * b.powf(-gamma) - lambda
}

/// Tail coefficient of `ℒx^γ / x^γ` for linear decay and multiplicative boost.
pub fn stable_exponent(a: f64, b: f64, lambda: f64, gamma: f64) -> f64 {
    -a * gamma + lambda * b.powf(gamma) - lambda
}

/// Golden-section minimizer of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Classifies `a` against `Λ ln b` with relative tolerance `tol`.
///
/// The margin is compared with `tol · max(a, Λ ln b)`, so rescaling time
/// `(a, Λ) → (sa, sΛ)` never changes the verdict.
pub fn classify_power_law(a: f64, b: f64, lambda: f64, tol: f64) -> Result<PowerLawClassification> {
    for (name, v) in [("a", a), ("b", b), ("lambda", lambda), ("tol", tol)] {
        ensure_finite(name, v)?;
    }
    if a <= 0.0 || lambda <= 0.0 || tol < 0.0 {
        return Err(Error::InvalidInput(format!(
            "need a > 0, lambda > 0, tol >= 0; got a={a}, lambda={lambda}, tol={tol}"
        )));
    }
    if b < 1.0 {
        return Err(Error::InvalidInput(format!("b must be >= 1 for a multiplicative comparison, got {b}")));
    }
    let growth = lambda * b.ln();
    let margin = a - growth;
    let scale = a.max(growth);
    let (verdict, witness) = if margin > tol * scale {
        let g = golden_section(|s| stable_exponent(a, b, lambda, s), 0.0, GAMMA_MAX, GAMMA_TOL);
        (VerdictKind::Stable, Some((g, stable_exponent(a, b, lambda, g))))
    } else if margin < -tol * scale {
        let g = golden_section(|s| sweeping_rate(a, b, lambda, s), 0.0, GAMMA_MAX, GAMMA_TOL);
        (VerdictKind::Sweeping, Some((g, sweeping_rate(a, b, lambda, g))))
    } else {
        (VerdictKind::Boundary, None)
    };
    Ok(PowerLawClassification {
        a,
        b,
        lambda,
        verdict,
        margin,
        gamma_witness: witness.map(|w| w.0),
        witness_value: witness.map(|w| w.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stable_example() {
        let c = classify_power_law(1.0, 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, VerdictKind::Stable);
        let g = c.gamma_witness.unwrap();
        // stationary point of -γ + 2^γ - 1
        let exact = (1.0 / 2f64.ln()).ln() / 2f64.ln();
        assert!((g - exact).abs() < 1e-6 && g <= 1.0);
        assert!(c.witness_value.unwrap() < 0.0);
    }

    #[test]
    fn sweeping_example() {
        let c = classify_power_law(0.5, 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, VerdictKind::Sweeping);
        assert!((sweeping_rate(0.5, 2.0, 1.0, 0.1) - (-0.01697)).abs() < 1e-5);
        let g = c.gamma_witness.unwrap();
        let exact = (2f64.ln() / 0.5).ln() / 2f64.ln();
        assert!((g - exact).abs() < 1e-6);
        assert!(c.witness_value.unwrap() <= sweeping_rate(0.5, 2.0, 1.0, 0.1));
    }

    #[test]
    fn boundary_and_errors() {
        let a = 2f64.ln();
        assert_eq!(classify_power_law(a, 2.0, 1.0, DEFAULT_TOL).unwrap().verdict, VerdictKind::Boundary);
        assert!(classify_power_law(1.0, 0.9, 1.0, DEFAULT_TOL).is_err());
        assert!(classify_power_law(0.0, 2.0, 1.0, DEFAULT_TOL).is_err());
    }

    #[test]
    fn phase_boundary_flip() {
        let verdicts: Vec<_> = (5..=10)
            .map(|k| classify_power_law(k as f64 / 10.0, 2.0, 1.0, DEFAULT_TOL).unwrap().verdict)
            .collect();
        assert_eq!(verdicts[..2], [VerdictKind::Sweeping; 2]);
        assert!(verdicts[2..].iter().all(|v| *v == VerdictKind::Stable));
    }

    #[test]
    fn rate_slope_at_zero() {
        let (a, b, l) = (0.5, 2.0, 1.0);
        let h = 1e-6;
        let slope = sweeping_rate(a, b, l, h) / h;
        assert!(sweeping_rate(a, b, l, 1e-12).abs() < 1e-11);
        assert!((slope - (a - l * b.ln())).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn time_rescaling_keeps_verdict(a in 0.01f64..5.0, b in 1.0f64..10.0, l in 0.01f64..5.0, s in 0.01f64..100.0) {
            let v1 = classify_power_law(a, b, l, DEFAULT_TOL).unwrap();
            let v2 = classify_power_law(s * a, b, s * l, DEFAULT_TOL).unwrap();
            prop_assert_eq!(v1.verdict, v2.verdict);
            if let (Some(g1), Some(g2)) = (v1.gamma_witness, v2.gamma_witness) {
                prop_assert!((g1 - g2).abs() < 1e-6);
            }
        }

        #[test]
        fn witness_certifies_branch(a in 0.01f64..5.0, b in 1.0f64..10.0, l in 0.01f64..5.0) {
            let c = classify_power_law(a, b, l, DEFAULT_TOL).unwrap();
            match c.verdict {
                VerdictKind::Stable | VerdictKind::Sweeping => prop_assert!(c.witness_value.unwrap() < 0.0),
                _ => prop_assert!(c.gamma_witness.is_none()),
            }
        }
    }
}
