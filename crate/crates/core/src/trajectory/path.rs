use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use crate::error::{ensure_finite, Error, Result};
use crate::model::ModelSpec;

/// RNG for path `index` of an ensemble seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Skeleton of one realized path: jump times with the states just before and after.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPath {
    pub x0: f64,
    pub jump_times: Vec<f64>,
    pub pre_jump: Vec<f64>,
    pub post_jump: Vec<f64>,
    pub t_end: f64,
    pub seed: u64,
}

pub(crate) fn check_start(model: &ModelSpec, x0: f64) -> Result<()> {
    ensure_finite("x0", x0)?;
    if !model.phase_space().contains(x0) {
        return Err(Error::InvalidInput(format!(
            "x0={x0} is outside the phase space {:?}",
            model.phase_space()
        )));
    }
    Ok(())
}

pub(crate) fn jump_law(model: &ModelSpec) -> Exp<f64> {
    Exp::new(model.lambda).expect("validated rate")
}

/// Simulates a path on `[0, t_end]` with the RNG `rng`.
pub(crate) fn simulate_with<R: Rng>(model: &ModelSpec, x0: f64, t_end: f64, seed: u64, rng: &mut R) -> TrajectoryPath {
    let law = jump_law(model);
    let mut path = TrajectoryPath {
        x0,
        jump_times: Vec::new(),
        pre_jump: Vec::new(),
        post_jump: Vec::new(),
        t_end,
        seed,
    };
    let (mut now, mut x) = (0.0, x0);
    loop {
        let gap: f64 = rng.sample(law);
        if now + gap > t_end {
            break;
        }
        now += gap;
        let pre = model.flow.advance_unchecked(x, gap);
        x = model.boost.q(pre);
        path.jump_times.push(now);
        path.pre_jump.push(pre);
        path.post_jump.push(x);
    }
    path
}

/// State at time `t` of a path started at `x0`, without storing the skeleton.
pub(crate) fn state_at<R: Rng>(model: &ModelSpec, x0: f64, t: f64, law: Exp<f64>, rng: &mut R) -> f64 {
    let (mut now, mut x) = (0.0, x0);
    loop {
        let gap: f64 = rng.sample(law);
        if now + gap > t {
            return model.flow.advance_unchecked(x, t - now);
        }
        now += gap;
        x = model.boost.q(model.flow.advance_unchecked(x, gap));
    }
}

/// Exact event-driven simulation: exponential gaps, closed-form or ODE flow between jumps.
pub fn simulate_trajectory(model: &ModelSpec, x0: f64, t_end: f64, seed: u64) -> Result<TrajectoryPath> {
    check_start(model, x0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be > 0, got {t_end}")));
    }
    let mut rng = path_rng(seed, 0);
    Ok(simulate_with(model, x0, t_end, seed, &mut rng))
}

impl TrajectoryPath {
    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// State at `t`; at a jump time the post-jump value (paths are right-continuous).
    pub fn sample_at(&self, model: &ModelSpec, t: f64) -> Result<f64> {
        if !(0.0..=self.t_end).contains(&t) {
            return Err(Error::InvalidInput(format!("t={t} outside [0, {}]", self.t_end)));
        }
        let k = self.jump_times.partition_point(|&s| s <= t);
        let (start, x) = if k == 0 {
            (0.0, self.x0)
        } else {
            (self.jump_times[k - 1], self.post_jump[k - 1])
        };
        Ok(model.flow.advance_unchecked(x, t - start))
    }

    /// `t_k,pre_state,post_state` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_k,pre_state,post_state\n");
        let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", 0.0, self.x0, self.x0);
        for ((t, a), b) in self.jump_times.iter().zip(&self.pre_jump).zip(&self.post_jump) {
            let _ = writeln!(s, "{t:.12e},{a:.12e},{b:.12e}");
        }
        s
    }
}
