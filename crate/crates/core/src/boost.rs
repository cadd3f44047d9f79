//! The post-infection boost `Q` and its Frobenius–Perron operator.
//!
//! Every family is lowered to a finite list of monotone pieces, each with an
//! invertible branch, plus an optional plateau `[K, M]` mapped to `M`. The
//! Ulam matrix is then built piece by piece from exact interval preimages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::density::Grid;
use crate::error::{ensure_finite, Error, Result};
use crate::expr::Expr;
use crate::model::PhaseSpace;
use crate::validation::{log_samples, ValidationReport};

/// Assumption set the boost is expected to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionProfile {
    /// Half-line: `Q(x) > x`, nonsingular.
    A,
    /// Interval `[0, M]`: `Q(x) > x` on `[0, M)`, `Q(M) = M`, nonsingular.
    B,
    /// Interval with plateau: `x < Q(x) < M` on `[0, K)`, `Q = M` on `[K, M]`.
    BPrime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub a: f64,
    /// Right end; `None` means the piece extends to infinity.
    #[serde(default)]
    pub b: Option<f64>,
    pub branch: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoostFamily {
    /// `Q(x) = x + l`
    AdditiveBoost {
        #[serde(alias = "L")]
        l: f64,
    },
    /// `Q(x) = b x + c`
    AffineBoost { b: f64, c: f64 },
    /// `Q(x) = x + θ (M - x)` on `[0, M]`
    SaturatingBoost {
        #[serde(alias = "M")]
        m: f64,
        theta: f64,
    },
    /// `inner` on `[0, K)`, `Q = M` on `[K, M]`
    PlateauBoost {
        #[serde(alias = "K")]
        k: f64,
        #[serde(alias = "M")]
        m: f64,
        inner: Expr,
    },
    CustomMonotonePieces { pieces: Vec<PieceSpec> },
}

#[derive(Debug, Clone, PartialEq)]
enum Branch {
    Affine { slope: f64, intercept: f64 },
    Expr { q: Expr, dq: Expr },
}

impl Branch {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Branch::Affine { slope, intercept } => slope * x + intercept,
            Branch::Expr { q, .. } => q.eval(x),
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        match self {
            Branch::Affine { slope, .. } => *slope,
            Branch::Expr { dq, .. } => dq.eval(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    branch: Branch,
}

impl Piece {
    fn increasing(&self) -> bool {
        let probe = if self.hi.is_finite() {
            0.5 * (self.lo + self.hi)
        } else {
            self.lo + 1.0
        };
        self.branch.deriv(probe) > 0.0
    }

    /// Image of `[u, v] ⊂ [lo, hi]` as an ordered interval.
    fn image(&self, u: f64, v: f64) -> (f64, f64) {
        let (qu, qv) = (self.branch.eval(u), self.branch.eval(v));
        if qu <= qv {
            (qu, qv)
        } else {
            (qv, qu)
        }
    }

    /// Inverse of the branch at `y`, restricted to `[u, v]`; clamps to the
    /// nearer end when `y` is outside the image of `[u, v]`.
    fn inverse_in(&self, y: f64, u: f64, v: f64) -> f64 {
        match &self.branch {
            Branch::Affine { slope, intercept } => ((y - intercept) / slope).clamp(u, v),
            Branch::Expr { .. } => {
                let inc = self.increasing();
                let (mut lo, mut hi) = (u, v);
                if !hi.is_finite() {
                    hi = lo.max(1.0);
                    let beyond = |x: f64| {
                        let q = self.branch.eval(x);
                        if inc {
                            q >= y
                        } else {
                            q <= y
                        }
                    };
                    while !beyond(hi) && hi < 1e300 {
                        hi *= 2.0;
                    }
                }
                let (ql, qh) = (self.branch.eval(lo), self.branch.eval(hi));
                let below = |q: f64| if inc { q < y } else { q > y };
                if !below(ql) {
                    return lo;
                }
                if below(qh) {
                    return hi;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if below(self.branch.eval(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// A boost map `Q` with its assumption profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostMap {
    family: BoostFamily,
    profile: AssumptionProfile,
    pieces: Vec<Piece>,
    /// `(K, M)`: `[K, M]` is mapped to `M`.
    plateau: Option<(f64, f64)>,
    space: PhaseSpace,
}

impl BoostMap {
    pub fn new(family: BoostFamily, profile: AssumptionProfile) -> Result<Self> {
        let expr_branch = |q: &Expr| Branch::Expr {
            q: q.clone(),
            dq: q.derivative(),
        };
        let (pieces, plateau, space) = match &family {
            BoostFamily::AdditiveBoost { l } => (
                vec![Piece {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    branch: Branch::Affine {
                        slope: 1.0,
                        intercept: *l,
                    },
                }],
                None,
                PhaseSpace::HalfLine,
            ),
            BoostFamily::AffineBoost { b, c } => (
                vec![Piece {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    branch: Branch::Affine {
                        slope: *b,
                        intercept: *c,
                    },
                }],
                None,
                PhaseSpace::HalfLine,
            ),
            BoostFamily::SaturatingBoost { m, theta } => (
                vec![Piece {
                    lo: 0.0,
                    hi: *m,
                    branch: Branch::Affine {
                        slope: 1.0 - theta,
                        intercept: theta * m,
                    },
                }],
                None,
                PhaseSpace::Interval { m: *m },
            ),
            BoostFamily::PlateauBoost { k, m, inner } => {
                if !(*k > 0.0 && k < m) {
                    return Err(Error::InvalidInput(format!(
                        "plateau needs 0 < K < M, got K={k}, M={m}"
                    )));
                }
                (
                    vec![Piece {
                        lo: 0.0,
                        hi: *k,
                        branch: expr_branch(inner),
                    }],
                    Some((*k, *m)),
                    PhaseSpace::Interval { m: *m },
                )
            }
            BoostFamily::CustomMonotonePieces { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::InvalidInput("no pieces given".into()));
                }
                let mut out = Vec::with_capacity(pieces.len());
                let mut expected_lo = 0.0;
                for (i, p) in pieces.iter().enumerate() {
                    let hi = p.b.unwrap_or(f64::INFINITY);
                    if p.a != expected_lo || !(hi > p.a) {
                        return Err(Error::InvalidInput(format!(
                            "pieces must tile [0, end) contiguously; piece {i} is [{}, {hi})",
                            p.a
                        )));
                    }
                    if hi.is_infinite() && i + 1 != pieces.len() {
                        return Err(Error::InvalidInput("only the last piece may be unbounded".into()));
                    }
                    expected_lo = hi;
                    out.push(Piece {
                        lo: p.a,
                        hi,
                        branch: expr_branch(&p.branch),
                    });
                }
                let space = if expected_lo.is_infinite() {
                    PhaseSpace::HalfLine
                } else {
                    PhaseSpace::Interval { m: expected_lo }
                };
                (out, None, space)
            }
        };
        for v in numeric_params(&family) {
            ensure_finite("boost parameter", v)?;
        }
        Ok(Self {
            family,
            profile,
            pieces,
            plateau,
            space,
        })
    }

    pub fn additive(l: f64) -> Self {
        Self::new(BoostFamily::AdditiveBoost { l }, AssumptionProfile::A).expect("finite parameters")
    }

    pub fn affine(b: f64, c: f64) -> Self {
        Self::new(BoostFamily::AffineBoost { b, c }, AssumptionProfile::A).expect("finite parameters")
    }

    pub fn saturating(m: f64, theta: f64) -> Self {
        Self::new(BoostFamily::SaturatingBoost { m, theta }, AssumptionProfile::B)
            .expect("finite parameters")
    }

    pub fn plateau(k: f64, m: f64, inner: &str) -> Result<Self> {
        Self::new(
            BoostFamily::PlateauBoost {
                k,
                m,
                inner: Expr::parse(inner)?,
            },
            AssumptionProfile::BPrime,
        )
    }

    pub fn family(&self) -> &BoostFamily {
        &self.family
    }

    pub fn profile(&self) -> AssumptionProfile {
        self.profile
    }

    pub fn phase_space(&self) -> PhaseSpace {
        self.space
    }

    /// `(K, M)` when `Q` has a plateau.
    pub fn plateau_bounds(&self) -> Option<(f64, f64)> {
        self.plateau
    }

    fn piece_index(&self, x: f64) -> Option<usize> {
        // left branch wins at shared endpoints
        self.pieces.iter().position(|p| x >= p.lo && x <= p.hi)
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        if let Some((k, m)) = self.plateau {
            if x >= k {
                return m;
            }
        }
        match self.piece_index(x) {
            Some(i) => self.pieces[i].branch.eval(x),
            None => f64::NAN,
        }
    }

    /// `Q(x)`.
    pub fn apply(&self, x: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        if !self.space.contains(x) {
            return Err(Error::InvalidInput(format!(
                "x={x} is outside the phase space {:?}",
                self.space
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn q(&self, x: f64) -> f64 {
        self.eval_unchecked(x)
    }

    /// `Q'(x)`; zero on the plateau.
    pub fn derivative(&self, x: f64) -> f64 {
        if let Some((k, _)) = self.plateau {
            if x >= k {
                return 0.0;
            }
        }
        match self.piece_index(x) {
            Some(i) => self.pieces[i].branch.deriv(x),
            None => f64::NAN,
        }
    }

    /// Pointwise Frobenius–Perron image `Σ_i f(φ_i(x)) |φ_i'(x)|`.
    ///
    /// Sums over the monotone pieces whose inverse branch lands in the piece.
    /// A preimage on a shared piece endpoint is counted once, for the left
    /// piece. The plateau contributes an atom at `M`, which has no density;
    /// for plateau maps this evaluates the substochastic part only.
    pub fn fp_apply_analytic<F: Fn(f64) -> f64>(&self, f: F, x: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        let mut total = 0.0;
        for (i, piece) in self.pieces.iter().enumerate() {
            let y = piece.inverse_in(x, piece.lo, piece.hi);
            // a clamped inverse means x is outside this branch's image
            if (piece.branch.eval(y) - x).abs() > 1e-9 * x.abs().max(1.0) {
                continue;
            }
            if i > 0 && y == piece.lo {
                continue;
            }
            let dq = piece.branch.deriv(y);
            if dq == 0.0 {
                return Err(Error::Unsupported(format!("Q' vanishes at {y}; no density image")));
            }
            total += f(y) / dq.abs();
        }
        Ok(total)
    }

    /// Koopman (composition) operator: `h(Q(x))`.
    pub fn koopman_apply<H: Fn(f64) -> f64>(&self, h: H, x: f64) -> f64 {
        h(self.eval_unchecked(x))
    }

    /// Ulam discretization of the Frobenius–Perron operator on `grid`.
    pub fn build_fp_matrix(&self, grid: &Grid) -> Result<FpMatrix> {
        let n = grid.n_cells();
        let dx = grid.dx();
        let x_max = grid.x_max();
        let bounded = match self.space {
            PhaseSpace::HalfLine => false,
            PhaseSpace::Interval { m } => {
                if (m - x_max).abs() > 1e-12 * m {
                    return Err(Error::GridMismatch(format!(
                        "bounded phase space [0, {m}] needs a grid ending at M, got {x_max}"
                    )));
                }
                true
            }
        };
        let cell_of = |y: f64| ((y / dx).floor().max(0.0) as usize).min(n - 1);

        let mut rows = Vec::with_capacity(n);
        let mut overflow = vec![0.0; n];
        for i in 0..n {
            let (a, b) = (grid.left(i), grid.right(i));
            let mut row: Vec<(usize, f64)> = Vec::new();
            let add = |row: &mut Vec<(usize, f64)>, j: usize, w: f64| {
                if w <= 0.0 {
                    return;
                }
                match row.iter_mut().find(|(c, _)| *c == j) {
                    Some(e) => e.1 += w,
                    None => row.push((j, w)),
                }
            };
            for piece in &self.pieces {
                let u = a.max(piece.lo);
                let v = b.min(piece.hi);
                if !(v > u) {
                    continue;
                }
                let inc = piece.increasing();
                let (ymin, ymax) = piece.image(u, v);
                // breakpoints in y: cell edges strictly inside the image
                let mut cuts = vec![ymin];
                let eps = 1e-9 * dx;
                let mut j = cell_of(ymin) + 1;
                while j < n && (j as f64) * dx < ymax - eps {
                    if (j as f64) * dx > ymin + eps {
                        cuts.push(j as f64 * dx);
                    }
                    j += 1;
                }
                if !bounded && ymin < x_max && ymax > x_max {
                    cuts.push(x_max);
                }
                cuts.push(ymax);
                // preimages of the cuts, ordered along x
                let pre: Vec<f64> = cuts
                    .iter()
                    .enumerate()
                    .map(|(k, &y)| {
                        if k == 0 {
                            if inc { u } else { v }
                        } else if k == cuts.len() - 1 {
                            if inc { v } else { u }
                        } else {
                            piece.inverse_in(y, u, v)
                        }
                    })
                    .collect();
                for k in 0..cuts.len() - 1 {
                    let len = (pre[k + 1] - pre[k]).abs();
                    let y_mid = 0.5 * (cuts[k] + cuts[k + 1]);
                    if !bounded && y_mid >= x_max {
                        overflow[i] += len / dx;
                    } else if cuts[k + 1] > cuts[k] {
                        add(&mut row, cell_of(y_mid), len / dx);
                    } else {
                        add(&mut row, cell_of(cuts[k]), len / dx);
                    }
                }
            }
            if let Some((k, _)) = self.plateau {
                let u = a.max(k);
                if b > u {
                    add(&mut row, n - 1, (b - u) / dx);
                }
            }
            row.sort_by_key(|(j, _)| *j);
            rows.push(row);
        }
        Ok(FpMatrix {
            n_cells: n,
            dx,
            rows,
            overflow,
            plateau_column: self.plateau.map(|_| n - 1),
        })
    }

    /// Samples the assumptions of `profile` and reports witnesses of failure.
    pub fn validate(&self, profile: AssumptionProfile) -> ValidationReport {
        let mut report = ValidationReport::default();
        let params = numeric_params(&self.family);
        report.push_bool(
            "parameters",
            params.iter().all(|v| v.is_finite()) && family_params_ok(&self.family),
            format!("{:?}", self.family),
        );

        let expected_space = match profile {
            AssumptionProfile::A => matches!(self.space, PhaseSpace::HalfLine),
            _ => matches!(self.space, PhaseSpace::Interval { .. }),
        };
        report.push_bool(
            "phase space",
            expected_space,
            format!("profile {profile:?} on {:?}", self.space),
        );

        let q0 = self.q(0.0);
        report.push("Q(0)>0", (!(q0 > 0.0)).then_some(0.0), format!("Q(0)={q0}"));

        let upper = self.space.upper().unwrap_or(1e3);
        let mut samples = vec![0.0];
        samples.extend(log_samples(upper * 1e-6, upper, 300));

        match profile {
            AssumptionProfile::A => {
                let bad = samples.iter().copied().find(|&x| !(self.q(x) > x));
                report.push("Q(x)>x", bad, witness_detail(bad, |x| self.q(x)));
            }
            AssumptionProfile::B => {
                let m = upper;
                let bad = samples
                    .iter()
                    .copied()
                    .filter(|&x| x < m)
                    .find(|&x| !(self.q(x) > x && self.q(x) <= m * (1.0 + 1e-12)));
                report.push("Q(x)>x", bad, witness_detail(bad, |x| self.q(x)));
                let qm = self.q(m);
                report.push(
                    "Q(M)=M",
                    ((qm - m).abs() > 1e-9 * m).then_some(m),
                    format!("Q(M)={qm}"),
                );
            }
            AssumptionProfile::BPrime => match self.plateau {
                None => report.push_bool("plateau", false, "profile b_prime needs a plateau [K, M]"),
                Some((k, m)) => {
                    let bad = samples
                        .iter()
                        .copied()
                        .filter(|&x| x < k)
                        .find(|&x| !(self.q(x) > x && self.q(x) < m));
                    report.push("Q(x)>x", bad, witness_detail(bad, |x| self.q(x)));
                    report.push_bool("plateau", true, format!("Q = M = {m} on [{k}, {m}]"));
                }
            },
        }

        // nonsingularity: Q' must not vanish inside any monotone piece
        let mut bad = None;
        for piece in &self.pieces {
            let hi = piece.hi.min(upper);
            for s in 1..64 {
                let x = piece.lo + (hi - piece.lo) * s as f64 / 64.0;
                if !(piece.branch.deriv(x).abs() > 1e-12) {
                    bad = Some(x);
                    break;
                }
            }
            if bad.is_some() {
                break;
            }
        }
        report.push("nonsingular", bad, witness_detail(bad, |x| self.derivative(x)));
        if let Some((k, m)) = self.plateau {
            if profile != AssumptionProfile::BPrime {
                report.push(
                    "nonsingular on plateau",
                    Some(m),
                    format!("A = {{{m}}} is null but Q^-1(A) = [{k}, {m}] has positive measure; use profile b_prime"),
                );
            }
        }
        report
    }
}

fn witness_detail(bad: Option<f64>, f: impl Fn(f64) -> f64) -> String {
    match bad {
        Some(x) => format!("fails at x={x} (value {})", f(x)),
        None => "holds on all samples".into(),
    }
}

fn numeric_params(family: &BoostFamily) -> Vec<f64> {
    match family {
        BoostFamily::AdditiveBoost { l } => vec![*l],
        BoostFamily::AffineBoost { b, c } => vec![*b, *c],
        BoostFamily::SaturatingBoost { m, theta } => vec![*m, *theta],
        BoostFamily::PlateauBoost { k, m, .. } => vec![*k, *m],
        BoostFamily::CustomMonotonePieces { pieces } => pieces
            .iter()
            .flat_map(|p| [p.a, p.b.unwrap_or(0.0)])
            .collect(),
    }
}

fn family_params_ok(family: &BoostFamily) -> bool {
    match family {
        BoostFamily::AdditiveBoost { l } => *l > 0.0,
        BoostFamily::AffineBoost { b, c } => *b >= 1.0 && *c > 0.0,
        BoostFamily::SaturatingBoost { m, theta } => *m > 0.0 && (0.0..1.0).contains(theta),
        BoostFamily::PlateauBoost { k, m, .. } => *k > 0.0 && k < m,
        BoostFamily::CustomMonotonePieces { .. } => true,
    }
}

/// Row-stochastic Ulam matrix: `rows[i]` lists `(j, P[i][j])`, the fraction
/// of cell `i` mapped into cell `j`; `overflow[i]` is the fraction mapped
/// past the right edge of a half-line grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FpMatrix {
    n_cells: usize,
    dx: f64,
    rows: Vec<Vec<(usize, f64)>>,
    overflow: Vec<f64>,
    plateau_column: Option<usize>,
}

impl FpMatrix {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn overflow(&self, i: usize) -> f64 {
        self.overflow[i]
    }

    pub fn plateau_column(&self) -> Option<usize> {
        self.plateau_column
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|(_, w)| w).sum::<f64>() + self.overflow[i]
    }

    /// Pushes cell masses forward; returns the new masses and the overflow mass.
    pub fn push_forward(&self, mass: &[f64]) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; self.n_cells];
        let mut over = 0.0;
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(j, w) in &self.rows[i] {
                out[j] += w * m;
            }
            over += self.overflow[i] * m;
        }
        (out, over)
    }

    /// Sparse triplets `row,col,value`; column `n_cells` is the overflow column.
    pub fn to_triplet_csv(&self) -> String {
        let mut s = String::from("row,col,value\n");
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                let _ = writeln!(s, "{i},{j},{w:e}");
            }
            if self.overflow[i] > 0.0 {
                let _ = writeln!(s, "{i},{},{:e}", self.n_cells, self.overflow[i]);
            }
        }
        s
    }
}
