//! The leftmost particle under the chain, and the delayed biased walk that
//! dominates it.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::configspace::{ChainParams, ParticleConfig};
use crate::error::{invalid, Result};
use crate::kernel::{g_threshold, step};
use crate::stats::{binomial_se, stream_rng, wilson_interval, Z95};

/// Leftmost particle at `round(b n / 2)`, the other `k - 1` packed against site `n`.
pub fn lbu_start_config(params: &ChainParams, b: f64) -> Result<ParticleConfig> {
    let (n, k) = (params.n(), params.k());
    if k == 0 {
        return invalid("need at least one particle");
    }
    let l0 = ((b * n as f64) / 2.0).round().max(1.0) as usize;
    if l0 + k - 1 > n || (k > 1 && l0 >= n - k + 2) {
        return invalid(format!("leftmost site {l0} collides with the packed block"));
    }
    let mut sites: Vec<usize> = vec![l0];
    sites.extend(n - k + 2..=n);
    ParticleConfig::from_sites(n, &sites)
}

#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    /// `floor((1/2 - b) n)`: the event is `L_t > threshold`.
    pub threshold: usize,
    pub t: u64,
    pub trials: u64,
    pub exceed: u64,
    pub estimate: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_leftmost: f64,
    pub mean_rightmost_hole: f64,
}

/// Empirical `P(L_t > threshold)` started from `start`.
pub fn leftmost_tail(
    start: &ParticleConfig,
    params: &ChainParams,
    threshold: usize,
    t: u64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if start.n() != params.n() || start.particle_count() != params.k() || params.k() == 0 {
        return invalid("start configuration does not match (n, k) or has no particles");
    }
    let finals: Vec<(usize, usize)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let mut x = start.clone();
            for _ in 0..t {
                step(&mut x, params, &mut rng);
            }
            (
                x.leftmost_particle().unwrap_or(0),
                x.rightmost_hole().unwrap_or(0),
            )
        })
        .collect();
    let exceed = finals.iter().filter(|(l, _)| *l > threshold).count() as u64;
    let (ci_low, ci_high) = wilson_interval(exceed, trials, Z95);
    let denom = trials.max(1) as f64;
    Ok(TailEstimate {
        threshold,
        t,
        trials,
        exceed,
        estimate: exceed as f64 / denom,
        std_err: binomial_se(exceed, trials),
        ci_low,
        ci_high,
        mean_leftmost: finals.iter().map(|f| f.0 as f64).sum::<f64>() / denom,
        mean_rightmost_hole: finals.iter().map(|f| f.1 as f64).sum::<f64>() / denom,
    })
}

/// `P(L_{t_n} > (1/2 - b) n)` from [`lbu_start_config`].
pub fn leftmost_walk_sim(
    params: &ChainParams,
    b: f64,
    t_n: u64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if params.beta() <= 0.0 {
        return invalid("leftmost comparison needs beta > 0");
    }
    let start = lbu_start_config(params, b)?;
    leftmost_tail(&start, params, g_threshold(params.n(), b), t_n, trials, seed)
}

/// Nearest-neighbour walk that moves with probability `move_prob` per step,
/// up with probability `p` and down with `q` when it moves.
#[derive(Debug, Clone, Copy)]
pub struct DelayedWalk {
    pub move_prob: f64,
    pub p: f64,
}

impl DelayedWalk {
    /// Holding probability `1 - 1/(n - 1)`, upward bias `beta`.
    pub fn for_params(params: &ChainParams) -> Self {
        DelayedWalk {
            move_prob: 1.0 / (params.n() - 1) as f64,
            p: params.p(),
        }
    }

    /// Steps until the next move, at least 1.
    fn wait<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.move_prob >= 1.0 {
            return 1;
        }
        let u: f64 = 1.0 - rng.gen::<f64>();
        (u.ln() / (-self.move_prob).ln_1p()).floor() as u64 + 1
    }

    /// First time the walk started at `s0` is at or below `level`, if before `t_cap`.
    pub fn hitting_time<R: Rng + ?Sized>(
        &self,
        s0: i64,
        level: i64,
        t_cap: u64,
        rng: &mut R,
    ) -> Option<u64> {
        let (mut s, mut t) = (s0, 0u64);
        while s > level {
            t += self.wait(rng);
            if t > t_cap {
                return None;
            }
            s += if rng.gen::<f64>() < self.p { 1 } else { -1 };
        }
        Some(t)
    }

    /// Position after `t` steps.
    pub fn position_at<R: Rng + ?Sized>(&self, s0: i64, t: u64, rng: &mut R) -> i64 {
        let (mut s, mut clock) = (s0, 0u64);
        loop {
            clock += self.wait(rng);
            if clock > t {
                return s;
            }
            s += if rng.gen::<f64>() < self.p { 1 } else { -1 };
        }
    }
}
