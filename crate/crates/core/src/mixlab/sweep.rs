use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::configspace::{binomial, ChainParams};
use crate::couplings::{path_coupling_upper_bound, CouplingKind};
use crate::error::{invalid, Error, Result};
use crate::spectral::{single_particle_lower_bound, wilson_lower_bound, Regime};

use super::exact::{exact_tmix_many, EXACT_STATE_CAP};
use super::mc::{coupling_times, estimate_from_outcomes, McConfig};

/// Bias as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaRule {
    Const(f64),
    /// `c / n`
    OverN(f64),
    /// `c / n^2`
    OverN2(f64),
    /// `c ln n / n`
    LogNOverN(f64),
}

impl BetaRule {
    pub fn eval(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            BetaRule::Const(v) => v,
            BetaRule::OverN(c) => c / nf,
            BetaRule::OverN2(c) => c / (nf * nf),
            BetaRule::LogNOverN(c) => c * nf.ln() / nf,
        }
    }
}

impl FromStr for BetaRule {
    type Err = Error;

    /// Accepts `v`, `const:v`, `c/n`, `c/n2`, `clogn/n`; a missing `c` means 1.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let coeff = |c: &str| -> Result<f64> {
            if c.is_empty() {
                return Ok(1.0);
            }
            c.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad coefficient {c:?} in beta rule")))
        };
        let rule = if let Some(v) = s.strip_prefix("const:") {
            BetaRule::Const(coeff(v)?)
        } else if let Some(c) = s.strip_suffix("logn/n") {
            BetaRule::LogNOverN(coeff(c)?)
        } else if let Some(c) = s.strip_suffix("/n2") {
            BetaRule::OverN2(coeff(c)?)
        } else if let Some(c) = s.strip_suffix("/n") {
            BetaRule::OverN(coeff(c)?)
        } else {
            BetaRule::Const(
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("unrecognised beta rule {s:?}")))?,
            )
        };
        Ok(rule)
    }
}

impl fmt::Display for BetaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaRule::Const(v) => write!(f, "const:{v}"),
            BetaRule::OverN(c) => write!(f, "{c}/n"),
            BetaRule::OverN2(c) => write!(f, "{c}/n2"),
            BetaRule::LogNOverN(c) => write!(f, "{c}logn/n"),
        }
    }
}

impl Serialize for BetaRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BetaRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(BetaRule::Const(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    /// Defaults to `n / 2`.
    #[serde(default)]
    pub k: Option<usize>,
    pub beta: BetaRule,
}

fn default_epsilon() -> f64 {
    0.25
}
fn default_trials() -> u64 {
    200
}
fn default_t_cap() -> u64 {
    10_000_000
}
fn default_exact_cap() -> u64 {
    1_000
}
fn default_kind() -> CouplingKind {
    CouplingKind::Monotone
}
fn default_b() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub cells: Vec<SweepCell>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_t_cap")]
    pub t_cap: u64,
    #[serde(default)]
    pub seed: u64,
    /// Cells with at most this many states use the exact curve.
    #[serde(default = "default_exact_cap")]
    pub exact_cap: u64,
    #[serde(default = "default_kind")]
    pub coupling: CouplingKind,
    #[serde(default = "default_b")]
    pub lbu_b: f64,
    #[serde(default)]
    pub record_wall_time: bool,
}

impl SweepConfig {
    pub fn new(cells: Vec<SweepCell>) -> Self {
        SweepConfig {
            cells,
            epsilon: default_epsilon(),
            trials: default_trials(),
            t_cap: default_t_cap(),
            seed: 0,
            exact_cap: default_exact_cap(),
            coupling: default_kind(),
            lbu_b: default_b(),
            record_wall_time: false,
        }
    }

    /// Every `(n, rule)` combination with `k = n / 2`.
    pub fn grid(ns: &[usize], rules: &[BetaRule]) -> Self {
        let cells = ns
            .iter()
            .flat_map(|&n| rules.iter().map(move |&beta| SweepCell { n, k: None, beta }))
            .collect();
        SweepConfig::new(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TmixKind {
    Exact,
    Mc,
    None,
}

impl TmixKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TmixKind::Exact => "exact",
            TmixKind::Mc => "mc",
            TmixKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub beta_rule: BetaRule,
    pub regime: Regime,
    pub tmix: Option<f64>,
    pub tmix_kind: TmixKind,
    pub wilson_lb: Option<f64>,
    pub pc_ub: Option<f64>,
    pub lbu_lb: Option<f64>,
    /// `tmix` over the regime's order `n^3 ln n`, `n ln n / beta^2` or `n^2 / beta`.
    pub ratio: Option<f64>,
    /// Observed `t_mix(3/4) / t_mix(eps)`.
    pub window_ratio: Option<f64>,
    pub seed: u64,
    pub wall_time_s: Option<f64>,
    pub error: Option<String>,
}

impl SweepRecord {
    /// `lb <= tmix <= ub` for every bound present, when `tmix` is exact.
    pub fn bounds_consistent(&self) -> bool {
        if self.tmix_kind != TmixKind::Exact {
            return true;
        }
        let t = match self.tmix {
            Some(t) => t,
            None => return true,
        };
        self.wilson_lb.is_none_or(|lb| lb <= t)
            && self.lbu_lb.is_none_or(|lb| lb <= t)
            && self.pc_ub.is_none_or(|ub| t <= ub)
    }
}

const WINDOW_EPS: f64 = 0.75;

fn cell_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_cell(cell: &SweepCell, index: usize, cfg: &SweepConfig) -> SweepRecord {
    let start = Instant::now();
    let n = cell.n;
    let k = cell.k.unwrap_or(n / 2);
    let beta = cell.beta.eval(n);
    let seed = cell_seed(cfg.seed, index);
    let mut rec = SweepRecord {
        n,
        k,
        beta,
        beta_rule: cell.beta,
        regime: Regime::classify(n, beta),
        tmix: None,
        tmix_kind: TmixKind::None,
        wilson_lb: None,
        pc_ub: None,
        lbu_lb: None,
        ratio: None,
        window_ratio: None,
        seed,
        wall_time_s: None,
        error: None,
    };
    let params = match ChainParams::new(n, k, beta) {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let mut errors = Vec::new();
    if beta > 0.0 {
        match wilson_lower_bound(&params, cfg.epsilon) {
            Ok(w) => rec.wilson_lb = Some(w.lower_bound_steps),
            Err(e) => errors.push(format!("wilson: {e}")),
        }
        match path_coupling_upper_bound(&params, cfg.epsilon) {
            Ok(b) => rec.pc_ub = Some(b.sharper),
            Err(e) => errors.push(format!("path coupling: {e}")),
        }
        if rec.regime == Regime::Ballistic {
            if let Ok(s) = single_particle_lower_bound(&params, cfg.lbu_b, 0.5) {
                rec.lbu_lb = s.certified(&params, cfg.epsilon);
            }
        }
    }
    let exact_ok = binomial(n, k).is_some_and(|s| s <= cfg.exact_cap.min(EXACT_STATE_CAP));
    let mut early = None;
    if exact_ok {
        let eps = [WINDOW_EPS, cfg.epsilon];
        match exact_tmix_many(&params, &eps, cfg.t_cap) {
            Ok(curve) => match curve.tmix(cfg.epsilon) {
                Some(t) => {
                    rec.tmix = Some(t as f64);
                    rec.tmix_kind = TmixKind::Exact;
                    early = curve.tmix(WINDOW_EPS);
                }
                None => errors.push(format!(
                    "exact: distance stayed at or above {} up to t = {}",
                    cfg.epsilon, cfg.t_cap
                )),
            },
            Err(e) => errors.push(format!("exact: {e}")),
        }
    } else {
        let mut mc = McConfig {
            epsilon: cfg.epsilon,
            trials: cfg.trials,
            t_cap: cfg.t_cap,
            kind: cfg.coupling,
            seed,
            t_grid: None,
        };
        let est = coupling_times(&params, &mc).and_then(|outcomes| {
            let main = estimate_from_outcomes(&mc, &outcomes)?;
            mc.epsilon = WINDOW_EPS;
            Ok((main, estimate_from_outcomes(&mc, &outcomes).ok()))
        });
        match est {
            Ok((main, first)) => {
                rec.tmix = Some(main.t_upper as f64);
                rec.tmix_kind = TmixKind::Mc;
                early = first.map(|e| e.t_upper);
            }
            Err(e) => errors.push(format!("mc: {e}")),
        }
    }
    if let (Some(t), Some(t0)) = (rec.tmix, early) {
        if t0 > 0 {
            rec.window_ratio = Some(t / t0 as f64);
        }
    }
    if let Some(t) = rec.tmix {
        let scale = rec.regime.scale(n, beta);
        if scale.is_finite() && scale > 0.0 {
            rec.ratio = Some(t / scale);
        }
    }
    if !errors.is_empty() {
        rec.error = Some(errors.join("; "));
    }
    if cfg.record_wall_time {
        rec.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    rec
}

/// Runs every cell; failures are recorded per cell and the sweep continues.
pub fn regime_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {}", cfg.epsilon));
    }
    Ok(cfg
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| run_cell(cell, i, cfg))
        .collect())
}

/// `(n, ratio)` points of one regime, in sweep order.
pub fn ratio_series(records: &[SweepRecord], regime: Regime) -> Vec<(usize, f64)> {
    records
        .iter()
        .filter(|r| r.regime == regime)
        .filter_map(|r| r.ratio.map(|x| (r.n, x)))
        .collect()
}

/// Largest over smallest value in a series.
pub fn spread(series: &[(usize, f64)]) -> f64 {
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, x)| (lo.min(x), hi.max(x)));
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_parsing() {
        assert_eq!("0".parse::<BetaRule>().unwrap(), BetaRule::Const(0.0));
        assert_eq!("const:0.3".parse::<BetaRule>().unwrap(), BetaRule::Const(0.3));
        assert_eq!("2/n".parse::<BetaRule>().unwrap(), BetaRule::OverN(2.0));
        assert_eq!("/n".parse::<BetaRule>().unwrap(), BetaRule::OverN(1.0));
        assert_eq!("3/n2".parse::<BetaRule>().unwrap(), BetaRule::OverN2(3.0));
        assert_eq!("0.5logn/n".parse::<BetaRule>().unwrap(), BetaRule::LogNOverN(0.5));
        assert!("fast".parse::<BetaRule>().is_err());
        for r in [BetaRule::Const(0.25), BetaRule::OverN(2.0), BetaRule::LogNOverN(1.5)] {
            assert_eq!(r.to_string().parse::<BetaRule>().unwrap(), r);
        }
        assert!((BetaRule::LogNOverN(1.0).eval(100) - (100f64).ln() / 100.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_cell_is_intermediate() {
        let rec = run_cell(
            &SweepCell { n: 8, k: None, beta: BetaRule::LogNOverN(1.0) },
            0,
            &SweepConfig::new(vec![]),
        );
        assert_eq!(rec.regime, Regime::Intermediate);
    }

    #[test]
    fn small_sweep_is_consistent() {
        let cfg = SweepConfig::grid(
            &[6, 8, 10],
            &[
                BetaRule::Const(0.0),
                BetaRule::OverN2(1.0),
                BetaRule::OverN(1.0),
                BetaRule::LogNOverN(1.0),
                BetaRule::Const(0.5),
            ],
        );
        let records = regime_sweep(&cfg).unwrap();
        assert_eq!(records.len(), 15);
        for r in &records {
            assert_eq!(r.tmix_kind, TmixKind::Exact, "{r:?}");
            assert!(r.error.is_none(), "{r:?}");
            assert!(r.bounds_consistent(), "{r:?}");
        }
        assert!(!ratio_series(&records, Regime::Diffusive).is_empty());
    }

    #[test]
    fn bad_cells_do_not_stop_the_sweep() {
        let mut cfg = SweepConfig::grid(&[8], &[BetaRule::Const(1.5), BetaRule::Const(0.2)]);
        cfg.cells.push(SweepCell { n: 8, k: Some(9), beta: BetaRule::Const(0.2) });
        let records = regime_sweep(&cfg).unwrap();
        assert!(records[0].error.is_some());
        assert!(records[1].error.is_none());
        assert!(records[2].error.is_some());
    }

    #[test]
    fn config_from_json() {
        let cfg: SweepConfig = serde_json::from_str(
            r#"{"cells": [{"n": 8, "beta": "1/n"}, {"n": 10, "k": 3, "beta": 0.2}], "seed": 4}"#,
        )
        .unwrap();
        assert_eq!(cfg.cells[0].beta, BetaRule::OverN(1.0));
        assert_eq!(cfg.cells[1].beta, BetaRule::Const(0.2));
        assert_eq!(cfg.trials, 200);
    }
}
