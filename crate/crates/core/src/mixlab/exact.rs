use rayon::prelude::*;
use serde::Serialize;

use crate::configspace::{ChainParams, StateSpace};
use crate::error::{invalid, Error, Result};
use crate::kernel::{stationary, StationaryDist, TransitionMatrix};

use super::tv_distance_unchecked;

/// Largest state space the all-starts curve will propagate.
pub const EXACT_STATE_CAP: u64 = 5_000;

/// Worst-start total-variation curve `d(t)` for `t = 0..=t_end`.
#[derive(Debug, Clone, Serialize)]
pub struct MixingCurve {
    pub params: ChainParams,
    pub times: Vec<u64>,
    pub d_values: Vec<f64>,
    /// `(eps, t_mix(eps))` for each requested `eps`; `None` if the curve ends first.
    pub tmix_eps: Vec<(f64, Option<u64>)>,
    /// Rank of the start attaining `d` at the last recorded time.
    pub worst_start: usize,
}

impl MixingCurve {
    /// Smallest recorded `t` with `d(t) < eps`.
    pub fn tmix(&self, eps: f64) -> Option<u64> {
        self.d_values
            .iter()
            .position(|&d| d < eps)
            .map(|i| self.times[i])
    }

    fn fill_tmix(&mut self, eps: &[f64]) {
        self.tmix_eps = eps.iter().map(|&e| (e, self.tmix(e))).collect();
    }
}

/// `||delta_x P^t - pi||` for one start, `t = 0..=t_max`.
pub fn tv_curve_from(
    p: &TransitionMatrix,
    pi: &StationaryDist,
    start: usize,
    t_max: u64,
) -> Vec<f64> {
    let mut mu = vec![0.0; p.dim()];
    mu[start] = 1.0;
    let mut buf = vec![0.0; p.dim()];
    let mut out = Vec::with_capacity(t_max as usize + 1);
    out.push(tv_distance_unchecked(&mu, &pi.probs));
    for _ in 0..t_max {
        p.push_forward_into(&mu, &mut buf);
        std::mem::swap(&mut mu, &mut buf);
        out.push(tv_distance_unchecked(&mu, &pi.probs));
    }
    out
}

struct AllStarts {
    rows: Vec<Vec<f64>>,
    bufs: Vec<Vec<f64>>,
}

impl AllStarts {
    fn new(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|x| {
                let mut r = vec![0.0; dim];
                r[x] = 1.0;
                r
            })
            .collect();
        AllStarts {
            rows,
            bufs: vec![vec![0.0; dim]; dim],
        }
    }

    fn worst(&self, pi: &[f64]) -> (f64, usize) {
        self.rows
            .par_iter()
            .enumerate()
            .map(|(x, r)| (tv_distance_unchecked(r, pi), x))
            .reduce(|| (f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
    }

    fn advance(&mut self, p: &TransitionMatrix) {
        self.rows
            .par_iter()
            .zip(self.bufs.par_iter_mut())
            .for_each(|(r, b)| p.push_forward_into(r, b));
        std::mem::swap(&mut self.rows, &mut self.bufs);
    }
}

/// Propagates every row of `P^t` until `t_max`, or until `d(t) < stop_below`.
pub fn exact_tv_curve_until(
    params: &ChainParams,
    t_max: u64,
    stop_below: f64,
    cap: u64,
) -> Result<MixingCurve> {
    let space = StateSpace::for_params(params, cap)?;
    let p = TransitionMatrix::build(&space, params);
    let pi = stationary(&space, params);
    let mut state = AllStarts::new(space.len());
    let mut times = Vec::new();
    let mut d_values = Vec::new();
    let mut worst_start = 0;
    for t in 0..=t_max {
        if t > 0 {
            state.advance(&p);
        }
        let (d, x) = state.worst(&pi.probs);
        times.push(t);
        d_values.push(d);
        worst_start = x;
        if d < stop_below {
            break;
        }
    }
    Ok(MixingCurve {
        params: *params,
        times,
        d_values,
        tmix_eps: Vec::new(),
        worst_start,
    })
}

/// Full curve `d(0..=t_max)` with `t_mix` extracted at 1/4 and 1/8.
pub fn exact_tv_curve(params: &ChainParams, t_max: u64) -> Result<MixingCurve> {
    let mut curve = exact_tv_curve_until(params, t_max, f64::NEG_INFINITY, EXACT_STATE_CAP)?;
    curve.fill_tmix(&[0.25, 0.125]);
    Ok(curve)
}

/// Smallest `t` with `d(t) < eps`.
pub fn exact_tmix(params: &ChainParams, epsilon: f64, t_max: u64) -> Result<u64> {
    exact_tmix_capped(params, epsilon, t_max, EXACT_STATE_CAP)
}

pub fn exact_tmix_capped(params: &ChainParams, epsilon: f64, t_max: u64, cap: u64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let curve = exact_tv_curve_until(params, t_max, epsilon, cap)?;
    curve.tmix(epsilon).ok_or_else(|| Error::Unconverged {
        t_max,
        last: *curve.d_values.last().unwrap_or(&1.0),
        d_values: curve.d_values,
    })
}

/// `t_mix` at several `eps` from one curve.
pub fn exact_tmix_many(params: &ChainParams, eps: &[f64], t_max: u64) -> Result<MixingCurve> {
    let smallest = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut curve = exact_tv_curve_until(params, t_max, smallest, EXACT_STATE_CAP)?;
    curve.fill_tmix(eps);
    Ok(curve)
}
