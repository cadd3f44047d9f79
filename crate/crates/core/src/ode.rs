//! Adaptive Dormand–Prince 5(4) integration of autonomous scalar ODEs.

/// Result of integrating `y' = f(y)` over a fixed horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum OdeOutcome {
    Reached(f64),
    /// The solution left `[0, ceiling]` before the horizon.
    Escaped,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error weights: fifth-order minus embedded fourth-order solution
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

pub(crate) fn integrate<F: Fn(f64) -> f64>(
    f: F,
    y0: f64,
    horizon: f64,
    tol: Tolerances,
    ceiling: f64,
) -> OdeOutcome {
    if horizon == 0.0 {
        return OdeOutcome::Reached(y0);
    }
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(y);
    let mut h = {
        let scale = tol.abs + tol.rel * y.abs();
        let d = k1.abs().max(1e-12);
        (0.01 * scale / d).sqrt().clamp(1e-10, horizon)
    };
    let mut steps = 0usize;
    while t < horizon {
        steps += 1;
        if steps > 10_000_000 {
            return OdeOutcome::Escaped;
        }
        if t + h > horizon {
            h = horizon - t;
        }
        let k2 = f(y + h * A21 * k1);
        let k3 = f(y + h * (A31 * k1 + A32 * k2));
        let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(y_new);
        let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = tol.abs + tol.rel * y.abs().max(y_new.abs());
        let ratio = (err / scale).abs();
        if !y_new.is_finite() {
            h *= 0.25;
            if h < 1e-14 {
                return OdeOutcome::Escaped;
            }
            continue;
        }
        if ratio <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            if y > ceiling || y < 0.0 {
                return OdeOutcome::Escaped;
            }
        }
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if ratio > 1.0 && h < 1e-14 * horizon.max(1.0) {
            // stiff or blowing up; the caller decides what that means
            return OdeOutcome::Escaped;
        }
    }
    OdeOutcome::Reached(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerances = Tolerances { abs: 1e-10, rel: 1e-8 };

    #[test]
    fn tiny_final_step_is_not_an_escape() {
        let g = |y: f64| -y - 0.2 * y * y;
        let x = 9.4308745915446;
        let OdeOutcome::Reached(mid) = integrate(g, x, 0.43953455172942085, TOL, 1e12) else {
            panic!("first leg escaped");
        };
        match integrate(g, mid, 0.01404008340526631, TOL, 1e12) {
            OdeOutcome::Reached(y) => assert!((y - 3.5501693855658).abs() < 1e-7, "{y}"),
            OdeOutcome::Escaped => panic!("escaped"),
        }
    }

    #[test]
    fn exponential_decay() {
        match integrate(|y| -y, 2.0, 3.0, TOL, 1e12) {
            OdeOutcome::Reached(y) => assert!((y - 2.0 * (-3.0f64).exp()).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn blow_up_detected() {
        // y' = y^2 from 2 blows up at t = 1/2
        assert_eq!(integrate(|y| y * y, 2.0, 1.0, TOL, 1e12), OdeOutcome::Escaped);
    }
}
