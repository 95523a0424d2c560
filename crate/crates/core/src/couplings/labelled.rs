//! Labelled-particle coupling of two exclusion processes, and the monotone
//! proposal coupling used for coupling-time estimates.

use rand::Rng;
use serde::Serialize;

use crate::configspace::{ChainParams, ParticleConfig};
use crate::error::{invalid, Result};
use crate::kernel::apply_move;

const EMPTY: u32 = u32::MAX;

/// Two labelled k-particle configurations driven by a common edge choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledPair {
    n: usize,
    /// Label on each site (0-based), or `EMPTY`.
    sigma: Vec<u32>,
    eta: Vec<u32>,
    pos_sigma: Vec<usize>,
    pos_eta: Vec<usize>,
    coupled_mask: Vec<bool>,
    coupled_count: usize,
    mismatched_sites: usize,
}

fn labelled(cfg: &ParticleConfig) -> (Vec<u32>, Vec<usize>) {
    let mut sites = vec![EMPTY; cfg.n()];
    let mut pos = Vec::with_capacity(cfg.particle_count());
    for (label, s) in cfg.positions().into_iter().enumerate() {
        sites[s - 1] = label as u32;
        pos.push(s - 1);
    }
    (sites, pos)
}

impl LabelledPair {
    /// Labels particles left to right in both configurations.
    pub fn new(sigma: &ParticleConfig, eta: &ParticleConfig) -> Result<Self> {
        if sigma.n() != eta.n() || sigma.particle_count() != eta.particle_count() {
            return invalid("both configurations need the same n and k");
        }
        if sigma.n() < 2 {
            return invalid("need n >= 2");
        }
        let (s, ps) = labelled(sigma);
        let (e, pe) = labelled(eta);
        let coupled_mask: Vec<bool> = ps.iter().zip(&pe).map(|(a, b)| a == b).collect();
        let coupled_count = coupled_mask.iter().filter(|&&c| c).count();
        let mismatched_sites = s
            .iter()
            .zip(&e)
            .filter(|(a, b)| (**a == EMPTY) != (**b == EMPTY))
            .count();
        Ok(LabelledPair {
            n: sigma.n(),
            sigma: s,
            eta: e,
            pos_sigma: ps,
            pos_eta: pe,
            coupled_mask,
            coupled_count,
            mismatched_sites,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.pos_sigma.len()
    }

    /// Whether the label-erased configurations agree.
    pub fn is_coupled(&self) -> bool {
        self.mismatched_sites == 0
    }

    pub fn coupled_mask(&self) -> &[bool] {
        &self.coupled_mask
    }

    pub fn coupled_count(&self) -> usize {
        self.coupled_count
    }

    /// 1-based site of `label` in each configuration.
    pub fn label_sites(&self, label: usize) -> (usize, usize) {
        (self.pos_sigma[label] + 1, self.pos_eta[label] + 1)
    }

    pub fn sigma_config(&self) -> ParticleConfig {
        erase(&self.sigma)
    }

    pub fn eta_config(&self) -> ParticleConfig {
        erase(&self.eta)
    }

    /// Labels on sites `i, i + 1` (0-based) in the given side.
    fn edge_labels(side: &[u32], i: usize) -> [u32; 2] {
        [side[i], side[i + 1]]
    }

    fn mismatch_at(&self, i: usize) -> usize {
        usize::from((self.sigma[i] == EMPTY) != (self.eta[i] == EMPTY))
    }

    fn refresh(&mut self, touched: &[u32]) {
        for &l in touched {
            if l == EMPTY {
                continue;
            }
            let l = l as usize;
            let now = self.pos_sigma[l] == self.pos_eta[l];
            if now != self.coupled_mask[l] {
                debug_assert!(now, "label {l} decoupled");
                self.coupled_mask[l] = now;
                if now {
                    self.coupled_count += 1;
                } else {
                    self.coupled_count -= 1;
                }
            }
        }
    }
}

fn erase(side: &[u32]) -> ParticleConfig {
    let sites: Vec<usize> = side
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != EMPTY)
        .map(|(i, _)| i + 1)
        .collect();
    ParticleConfig::from_sites(side.len(), &sites).expect("distinct in-range sites")
}

/// Puts `first` on site `i` and `second` on `i + 1` (0-based).
fn place(side: &mut [u32], pos: &mut [usize], i: usize, first: u32, second: u32) {
    side[i] = first;
    side[i + 1] = second;
    for (l, s) in [(first, i), (second, i + 1)] {
        if l != EMPTY {
            pos[l as usize] = s;
        }
    }
}

fn count(labels: [u32; 2]) -> usize {
    labels.iter().filter(|&&l| l != EMPTY).count()
}

/// The lone label on a one-particle edge.
fn lone(labels: [u32; 2]) -> u32 {
    if labels[0] != EMPTY {
        labels[0]
    } else {
        labels[1]
    }
}

fn lone_placement(label: u32, right: bool) -> (u32, u32) {
    if right {
        (EMPTY, label)
    } else {
        (label, EMPTY)
    }
}

fn fair_placement<R: Rng + ?Sized>(labels: [u32; 2], rng: &mut R) -> (u32, u32) {
    if rng.gen::<bool>() {
        (labels[1], labels[0])
    } else {
        (labels[0], labels[1])
    }
}

/// Arranges a full edge so that `label` sits on the left iff `left`.
fn pinned_placement(labels: [u32; 2], label: u32, left: bool) -> (u32, u32) {
    let other = if labels[0] == label { labels[1] } else { labels[0] };
    if left {
        (label, other)
    } else {
        (other, label)
    }
}

/// One step of the labelled coupling, in place.
///
/// An edge is chosen uniformly. A side with one particle on it places that
/// particle by a `p`-coin, shared when both sides have one. A side with two
/// particles shuffles them by a fair coin, except that the second side copies
/// the placement of any label it shares with the first.
pub fn coupled_step<R: Rng + ?Sized>(pair: &mut LabelledPair, params: &ChainParams, rng: &mut R) {
    let i = rng.gen_range(0..pair.n - 1);
    let before = pair.mismatch_at(i) + pair.mismatch_at(i + 1);
    let ls = LabelledPair::edge_labels(&pair.sigma, i);
    let le = LabelledPair::edge_labels(&pair.eta, i);
    let (new_s, new_e) = match (count(ls), count(le)) {
        (0, 0) => return,
        (1, 1) => {
            let right = rng.gen::<f64>() < params.p();
            (lone_placement(lone(ls), right), lone_placement(lone(le), right))
        }
        (1, 0) => {
            let right = rng.gen::<f64>() < params.p();
            (lone_placement(lone(ls), right), (le[0], le[1]))
        }
        (0, 1) => {
            let right = rng.gen::<f64>() < params.p();
            ((ls[0], ls[1]), lone_placement(lone(le), right))
        }
        (2, 0) => (fair_placement(ls, rng), (le[0], le[1])),
        (0, 2) => ((ls[0], ls[1]), fair_placement(le, rng)),
        (1, 2) => {
            let right = rng.gen::<f64>() < params.p();
            let l = lone(ls);
            let e = if le.contains(&l) {
                pinned_placement(le, l, !right)
            } else {
                fair_placement(le, rng)
            };
            (lone_placement(l, right), e)
        }
        (2, 1) => {
            let right = rng.gen::<f64>() < params.p();
            let l = lone(le);
            let s = if ls.contains(&l) {
                pinned_placement(ls, l, !right)
            } else {
                fair_placement(ls, rng)
            };
            (s, lone_placement(l, right))
        }
        (2, 2) => {
            let s = fair_placement(ls, rng);
            let shared = [s.0, s.1].into_iter().filter(|l| le.contains(l)).min();
            let e = match shared {
                Some(l) => pinned_placement(le, l, s.0 == l),
                None => fair_placement(le, rng),
            };
            (s, e)
        }
        _ => unreachable!("an edge holds at most two particles"),
    };
    place(&mut pair.sigma, &mut pair.pos_sigma, i, new_s.0, new_s.1);
    place(&mut pair.eta, &mut pair.pos_eta, i, new_e.0, new_e.1);
    let touched = [ls[0], ls[1], le[0], le[1]];
    pair.refresh(&touched);
    let after = pair.mismatch_at(i) + pair.mismatch_at(i + 1);
    pair.mismatched_sites = pair.mismatched_sites + after - before;
}

/// Hitting time of a coupling run, or the cap if it was reached first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "t", rename_all = "snake_case")]
pub enum CouplingOutcome {
    Coupled(u64),
    TimedOut(u64),
}

impl CouplingOutcome {
    pub fn time(&self) -> Option<u64> {
        match self {
            CouplingOutcome::Coupled(t) => Some(*t),
            CouplingOutcome::TimedOut(_) => None,
        }
    }
}

/// Which coupling drives a coupling-time run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// The labelled-particle coupling.
    Labelled,
    /// Same edge and same coin on both sides; order preserving.
    Monotone,
}

fn check_start(x: &ParticleConfig, y: &ParticleConfig, params: &ChainParams) -> Result<()> {
    if x.n() != params.n() || y.n() != params.n() {
        return invalid("configuration length does not match n");
    }
    if x.particle_count() != params.k() || y.particle_count() != params.k() {
        return invalid("configurations need k particles each");
    }
    Ok(())
}

/// Runs the labelled coupling until the label-erased configurations agree.
pub fn coupling_time<R: Rng + ?Sized>(
    x: &ParticleConfig,
    y: &ParticleConfig,
    params: &ChainParams,
    rng: &mut R,
    t_cap: u64,
) -> Result<CouplingOutcome> {
    check_start(x, y, params)?;
    let mut pair = LabelledPair::new(x, y)?;
    let mut t = 0;
    while !pair.is_coupled() {
        if t >= t_cap {
            return Ok(CouplingOutcome::TimedOut(t_cap));
        }
        coupled_step(&mut pair, params, rng);
        t += 1;
    }
    Ok(CouplingOutcome::Coupled(t))
}

/// Per-label first coupling times alongside the full coupling time.
#[derive(Debug, Clone, Serialize)]
pub struct LabelledRun {
    pub outcome: CouplingOutcome,
    pub label_times: Vec<Option<u64>>,
}

pub fn labelled_run<R: Rng + ?Sized>(
    x: &ParticleConfig,
    y: &ParticleConfig,
    params: &ChainParams,
    rng: &mut R,
    t_cap: u64,
) -> Result<LabelledRun> {
    check_start(x, y, params)?;
    let mut pair = LabelledPair::new(x, y)?;
    let mut label_times: Vec<Option<u64>> =
        pair.coupled_mask.iter().map(|&c| c.then_some(0)).collect();
    let mut t = 0;
    let mut outcome = None;
    while t < t_cap {
        if pair.is_coupled() && outcome.is_none() {
            outcome = Some(CouplingOutcome::Coupled(t));
        }
        if outcome.is_some() && pair.coupled_count == pair.k() {
            break;
        }
        coupled_step(&mut pair, params, rng);
        t += 1;
        for (l, slot) in label_times.iter_mut().enumerate() {
            if slot.is_none() && pair.coupled_mask[l] {
                *slot = Some(t);
            }
        }
    }
    if outcome.is_none() && pair.is_coupled() {
        outcome = Some(CouplingOutcome::Coupled(t));
    }
    Ok(LabelledRun {
        outcome: outcome.unwrap_or(CouplingOutcome::TimedOut(t_cap)),
        label_times,
    })
}

/// Runs both configurations with a shared edge and a shared coin until they meet.
pub fn monotone_coupling_time<R: Rng + ?Sized>(
    x: &ParticleConfig,
    y: &ParticleConfig,
    params: &ChainParams,
    rng: &mut R,
    t_cap: u64,
) -> Result<CouplingOutcome> {
    check_start(x, y, params)?;
    let (mut a, mut b) = (x.clone(), y.clone());
    let n = params.n();
    let mut t = 0;
    while a != b {
        if t >= t_cap {
            return Ok(CouplingOutcome::TimedOut(t_cap));
        }
        let e = rng.gen_range(1..n);
        let right = rng.gen::<f64>() < params.p();
        apply_move(&mut a, e, right);
        apply_move(&mut b, e, right);
        t += 1;
    }
    Ok(CouplingOutcome::Coupled(t))
}

pub fn run_coupling<R: Rng + ?Sized>(
    kind: CouplingKind,
    x: &ParticleConfig,
    y: &ParticleConfig,
    params: &ChainParams,
    rng: &mut R,
    t_cap: u64,
) -> Result<CouplingOutcome> {
    match kind {
        CouplingKind::Labelled => coupling_time(x, y, params, rng, t_cap),
        CouplingKind::Monotone => monotone_coupling_time(x, y, params, rng, t_cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{extreme_configs, StateSpace, DEFAULT_STATE_CAP};
    use crate::kernel::TransitionMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, k: usize, beta: f64) -> ChainParams {
        ChainParams::new(n, k, beta).unwrap()
    }

    fn cfg(bits: &str) -> ParticleConfig {
        ParticleConfig::from_bits(bits).unwrap()
    }

    #[test]
    fn start_labels_left_to_right() {
        let pair = LabelledPair::new(&cfg("1010"), &cfg("0110")).unwrap();
        assert_eq!(pair.label_sites(0), (1, 2));
        assert_eq!(pair.label_sites(1), (3, 3));
        assert_eq!(pair.coupled_mask(), &[false, true]);
        assert!(!pair.is_coupled());
        assert!(LabelledPair::new(&cfg("1010"), &cfg("1110")).is_err());
    }

    #[test]
    fn identical_pair_stays_identical() {
        let c = params(8, 3, 0.4);
        let x = cfg("10100100");
        let mut pair = LabelledPair::new(&x, &x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            coupled_step(&mut pair, &c, &mut rng);
            assert_eq!(pair.sigma, pair.eta);
        }
        assert_eq!(coupling_time(&x, &x, &c, &mut rng, 10).unwrap(), CouplingOutcome::Coupled(0));
    }

    #[test]
    fn coupled_labels_never_decouple() {
        let c = params(12, 5, 0.2);
        let (x, y) = extreme_configs(12, 5).unwrap();
        let mut pair = LabelledPair::new(&x, &y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut prev = pair.coupled_mask().to_vec();
        for _ in 0..100_000 {
            coupled_step(&mut pair, &c, &mut rng);
            for (l, (&was, &now)) in prev.iter().zip(pair.coupled_mask()).enumerate() {
                assert!(!was || now, "label {l}");
                let (a, b) = pair.label_sites(l);
                assert_eq!(now, a == b);
            }
            prev.copy_from_slice(pair.coupled_mask());
            assert_eq!(pair.sigma_config().particle_count(), 5);
            let mismatch = (1..=12)
                .filter(|&s| pair.sigma_config().is_occupied(s) != pair.eta_config().is_occupied(s))
                .count();
            assert_eq!(pair.is_coupled(), mismatch == 0);
        }
    }

    #[test]
    fn two_sites_couple_in_one_step() {
        let c = params(2, 1, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t = coupling_time(&cfg("10"), &cfg("01"), &c, &mut rng, 10).unwrap();
            assert_eq!(t, CouplingOutcome::Coupled(1));
        }
    }

    #[test]
    fn timeout_is_reported() {
        let c = params(30, 15, 0.0);
        let (x, y) = extreme_configs(30, 15).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            coupling_time(&x, &y, &c, &mut rng, 5).unwrap(),
            CouplingOutcome::TimedOut(5)
        );
        assert_eq!(
            monotone_coupling_time(&x, &y, &c, &mut rng, 5).unwrap(),
            CouplingOutcome::TimedOut(5)
        );
    }

    #[test]
    fn single_side_law_matches_kernel_row() {
        let c = params(6, 3, 0.2);
        let space = StateSpace::new(6, 3, DEFAULT_STATE_CAP).unwrap();
        let p = TransitionMatrix::build(&space, &c);
        let (x, y) = (cfg("110100"), cfg("011010"));
        let start = LabelledPair::new(&x, &y).unwrap();
        let mut counts = [vec![0u64; space.len()], vec![0u64; space.len()]];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples = 200_000;
        for _ in 0..samples {
            let mut pair = start.clone();
            coupled_step(&mut pair, &c, &mut rng);
            counts[0][space.index_of(&pair.sigma_config())] += 1;
            counts[1][space.index_of(&pair.eta_config())] += 1;
        }
        for (side, from) in [(0, &x), (1, &y)] {
            let row = space.index_of(from);
            for (z, &cnt) in counts[side].iter().enumerate() {
                let prob = p.get(row, z);
                let se = (prob * (1.0 - prob) / samples as f64).sqrt();
                let freq = cnt as f64 / samples as f64;
                assert!((freq - prob).abs() <= 4.0 * se + 1e-12, "side {side} state {z}");
            }
        }
    }

    #[test]
    fn monotone_coupling_preserves_order() {
        let c = params(10, 4, 0.3);
        let (x, y) = extreme_configs(10, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut a, mut b) = (x.clone(), y.clone());
        for _ in 0..5_000 {
            let e = rng.gen_range(1..10);
            let right = rng.gen::<f64>() < c.p();
            apply_move(&mut a, e, right);
            apply_move(&mut b, e, right);
            let (ha, hb) = (
                crate::configspace::path_from_particles(&a),
                crate::configspace::path_from_particles(&b),
            );
            assert!(hb.le_pointwise(&ha) || ha.le_pointwise(&hb));
        }
    }
}
