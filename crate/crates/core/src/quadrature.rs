//! Fixed Gauss–Legendre rules.

const NODES4: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const WEIGHTS4: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

const NODES8: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const WEIGHTS8: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// 4-point rule on `[a, b]`.
pub(crate) fn gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    NODES4
        .iter()
        .zip(WEIGHTS4)
        .map(|(t, w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

/// 8-point nodes and weights mapped to `[a, b]`.
pub(crate) fn gauss8_points(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    NODES8
        .iter()
        .zip(WEIGHTS8)
        .map(move |(t, w)| (mid + half * t, w * half))
}

pub(crate) fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    gauss8_points(a, b).map(|(x, w)| w * f(x)).sum()
}

/// 8-point rule on geometrically graded subintervals of `[a, b]`, `a > 0`;
/// suited to integrands that vary on the scale of `x` itself.
pub(crate) fn gauss8_graded<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let pieces = ((hi / lo).ln() / 0.5f64.ln().abs()).ceil().clamp(1.0, 200.0) as usize;
    let ratio = (hi / lo).powf(1.0 / pieces as f64);
    let mut total = 0.0;
    let mut left = lo;
    for k in 0..pieces {
        let right = if k + 1 == pieces { hi } else { left * ratio };
        total += gauss8(f, left, right);
        left = right;
    }
    sign * total
}
