use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{extreme_configs, ChainParams};
use crate::couplings::{run_coupling, CouplingKind, CouplingOutcome};
use crate::error::{invalid, Error, Result};
use crate::stats::{stream_rng, wilson_interval, Z95};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub epsilon: f64,
    pub trials: u64,
    pub t_cap: u64,
    pub kind: CouplingKind,
    pub seed: u64,
    /// Candidate times; every integer up to `t_cap` when absent.
    pub t_grid: Option<Vec<u64>>,
}

/// Coupling-time upper estimate of `t_mix(eps)` from the extreme pair.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub kind: CouplingKind,
    pub start_pair: &'static str,
    pub trials: u64,
    pub timeouts: u64,
    /// Smallest candidate `t` whose upper confidence limit on `P(tau > t)` is below `eps`.
    pub t_upper: u64,
    pub exceed_at_t: u64,
    pub ucl_at_t: f64,
    pub mean_coupled_time: f64,
    pub confidence: f64,
}

/// Coupling times of independent runs from the two extreme configurations.
pub fn coupling_times(params: &ChainParams, cfg: &McConfig) -> Result<Vec<CouplingOutcome>> {
    let k = params.k();
    let (left, right) = extreme_configs(params.n(), k)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(cfg.seed, trial);
            run_coupling(cfg.kind, &left, &right, params, &mut rng, cfg.t_cap)
        })
        .collect()
}

pub fn mc_tmix_upper(params: &ChainParams, cfg: &McConfig) -> Result<McEstimate> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {}", cfg.epsilon));
    }
    if cfg.trials == 0 {
        return Err(Error::Unresolved("no trials requested".into()));
    }
    let outcomes = coupling_times(params, cfg)?;
    estimate_from_outcomes(cfg, &outcomes)
}

/// The estimate of [`mc_tmix_upper`] from already simulated coupling times.
pub fn estimate_from_outcomes(cfg: &McConfig, outcomes: &[CouplingOutcome]) -> Result<McEstimate> {
    let trials = outcomes.len() as u64;
    if trials == 0 {
        return Err(Error::Unresolved("no trials requested".into()));
    }
    let mut times: Vec<u64> = outcomes.iter().filter_map(|o| o.time()).collect();
    times.sort_unstable();
    let timeouts = trials - times.len() as u64;
    if times.is_empty() {
        return Err(Error::Unresolved(format!(
            "all {trials} trials hit the cap of {} steps",
            cfg.t_cap
        )));
    }
    let exceed = |t: u64| trials - times.partition_point(|&s| s <= t) as u64;
    let candidates: Vec<u64> = match &cfg.t_grid {
        Some(grid) => {
            let mut g: Vec<u64> = grid.iter().copied().filter(|&t| t <= cfg.t_cap).collect();
            g.sort_unstable();
            g
        }
        None => std::iter::once(0).chain(times.iter().copied()).collect(),
    };
    for t in candidates {
        let e = exceed(t);
        let (_, ucl) = wilson_interval(e, trials, Z95);
        if ucl < cfg.epsilon {
            return Ok(McEstimate {
                kind: cfg.kind,
                start_pair: "extreme",
                trials,
                timeouts,
                t_upper: t,
                exceed_at_t: e,
                ucl_at_t: ucl,
                mean_coupled_time: times.iter().sum::<u64>() as f64 / times.len() as f64,
                confidence: 0.95,
            });
        }
    }
    Err(Error::Unresolved(format!(
        "no candidate time up to {} has an upper confidence limit below {}",
        cfg.t_cap, cfg.epsilon
    )))
}
