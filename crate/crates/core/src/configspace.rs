//! Configurations of k particles on the n-path.
//!
//! Sites are numbered `1..=n` throughout, matching the height-function
//! convention `h(j) - h(j-1) = +1` iff site `j` is occupied. A
//! [`ParticleConfig`] is a bit-packed occupancy vector, a [`PathConfig`] is
//! the corresponding lattice path `h(0..=n)`, and [`StateSpace`] ranks the
//! `C(n, k)` configurations colexicographically for exact linear algebra.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default cap on the number of enumerated states for exact computations.
pub const DEFAULT_STATE_CAP: u64 = 20_000;

/// Chain parameters `(n, k, beta)` and every constant derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawParams", try_from = "RawParams")]
pub struct ChainParams {
    n: usize,
    k: usize,
    beta: f64,
    p: f64,
    q: f64,
    ln_alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    k: usize,
    beta: f64,
}

impl From<ChainParams> for RawParams {
    fn from(c: ChainParams) -> Self {
        RawParams {
            n: c.n,
            k: c.k,
            beta: c.beta,
        }
    }
}

impl TryFrom<RawParams> for ChainParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ChainParams::new(r.n, r.k, r.beta)
    }
}

impl ChainParams {
    pub fn new(n: usize, k: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return invalid(format!("path length n must be at least 2, got {n}"));
        }
        if k > n {
            return invalid(format!("particle count k = {k} exceeds n = {n}"));
        }
        if !beta.is_finite() || !(0.0..1.0).contains(&beta) {
            return invalid(format!("bias beta must lie in [0, 1), got {beta}"));
        }
        Ok(ChainParams {
            n,
            k,
            beta,
            p: (1.0 + beta) / 2.0,
            q: (1.0 - beta) / 2.0,
            // ln sqrt((1+b)/(1-b)) = atanh(b)
            ln_alpha: beta.atanh(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Probability of placing the particle on the right endpoint.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `alpha = sqrt(p / q) >= 1`.
    pub fn alpha(&self) -> f64 {
        self.ln_alpha.exp()
    }

    pub fn ln_alpha(&self) -> f64 {
        self.ln_alpha
    }

    /// `theta = q / p = alpha^-2`.
    pub fn theta(&self) -> f64 {
        (-2.0 * self.ln_alpha).exp()
    }

    /// `2 sqrt(pq) = sqrt(1 - beta^2)`.
    pub fn two_sqrt_pq(&self) -> f64 {
        ((1.0 - self.beta) * (1.0 + self.beta)).sqrt()
    }

    /// `delta = 1 - 2 sqrt(pq)`, evaluated without cancellation.
    pub fn delta(&self) -> f64 {
        let b2 = self.beta * self.beta;
        b2 / (1.0 + self.two_sqrt_pq())
    }

    /// Spectral gap `(1 - 2 sqrt(pq) cos(pi/n)) / (n - 1)`.
    pub fn gamma(&self) -> f64 {
        // 1 - s cos(x) = (1 - s) + s * 2 sin^2(x/2)
        let half = std::f64::consts::PI / (2.0 * self.n as f64);
        let s = self.two_sqrt_pq();
        (self.delta() + s * 2.0 * half.sin().powi(2)) / (self.n as f64 - 1.0)
    }

    pub fn density(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        ChainParams::new(self.n, self.k, beta)
    }

    pub fn num_states(&self) -> Option<u64> {
        binomial(self.n, self.k)
    }
}

/// `C(n, k)` if it fits below `2^63`.
pub fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc >= 1u128 << 63 {
            return None;
        }
    }
    Some(acc as u64)
}

const WORD: usize = 64;

/// Occupancy vector of k particles on sites `1..=n`, one bit per site.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParticleConfig {
    n: usize,
    k: usize,
    words: Vec<u64>,
}

impl ParticleConfig {
    pub fn empty(n: usize) -> Self {
        ParticleConfig {
            n,
            k: 0,
            words: vec![0; n.div_ceil(WORD).max(1)],
        }
    }

    /// Builds a configuration from 1-based occupied sites.
    pub fn from_sites(n: usize, sites: &[usize]) -> Result<Self> {
        let mut cfg = ParticleConfig::empty(n);
        for &s in sites {
            if s == 0 || s > n {
                return invalid(format!("site {s} outside 1..={n}"));
            }
            if cfg.is_occupied(s) {
                return invalid(format!("site {s} listed twice"));
            }
            cfg.set(s);
        }
        Ok(cfg)
    }

    /// Parses a `0`/`1` string, leftmost character is site 1.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let n = bits.len();
        let mut cfg = ParticleConfig::empty(n);
        for (i, c) in bits.chars().enumerate() {
            match c {
                '1' => cfg.set(i + 1),
                '0' => {}
                other => return invalid(format!("unexpected character {other:?} in occupancy")),
            }
        }
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn particle_count(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn is_occupied(&self, site: usize) -> bool {
        debug_assert!(site >= 1 && site <= self.n);
        let i = site - 1;
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    fn set(&mut self, site: usize) {
        let i = site - 1;
        self.words[i / WORD] |= 1 << (i % WORD);
        self.k += 1;
    }

    /// Exchanges the contents of sites `site` and `site + 1`.
    #[inline]
    pub(crate) fn swap_with_right(&mut self, site: usize) {
        if self.is_occupied(site) != self.is_occupied(site + 1) {
            for s in [site - 1, site] {
                self.words[s / WORD] ^= 1 << (s % WORD);
            }
        }
    }

    /// Sorted 1-based particle locations `z_1 < ... < z_k`.
    pub fn positions(&self) -> Vec<usize> {
        (1..=self.n).filter(|&s| self.is_occupied(s)).collect()
    }

    /// Location `L(x)` of the leftmost particle.
    pub fn leftmost_particle(&self) -> Option<usize> {
        for (w, &word) in self.words.iter().enumerate() {
            if word != 0 {
                return Some(w * WORD + word.trailing_zeros() as usize + 1);
            }
        }
        None
    }

    /// Location `R(x)` of the rightmost unoccupied site.
    pub fn rightmost_hole(&self) -> Option<usize> {
        for w in (0..self.words.len()).rev() {
            let used = (self.n - w * WORD).min(WORD);
            let mask = if used == WORD { u64::MAX } else { (1u64 << used) - 1 };
            let holes = !self.words[w] & mask;
            if holes != 0 {
                return Some(w * WORD + (63 - holes.leading_zeros() as usize) + 1);
            }
        }
        None
    }

    /// Sum of 1-based particle locations.
    pub fn position_sum(&self) -> u64 {
        self.positions().iter().map(|&s| s as u64).sum()
    }

    /// Mirror image under `site -> n + 1 - site` combined with particle-hole exchange.
    pub fn reflected_dual(&self) -> ParticleConfig {
        let mut out = ParticleConfig::empty(self.n);
        for s in 1..=self.n {
            if !self.is_occupied(self.n + 1 - s) {
                out.set(s);
            }
        }
        out
    }
}

impl fmt::Display for ParticleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 1..=self.n {
            f.write_str(if self.is_occupied(s) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for ParticleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParticleConfig({self})")
    }
}

/// Lattice path `h(0..=n)` with `h(0) = 0` and unit increments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathConfig {
    heights: Vec<i64>,
}

impl PathConfig {
    pub fn new(heights: Vec<i64>) -> Result<Self> {
        if heights.len() < 2 {
            return invalid("a path needs at least two heights");
        }
        if heights[0] != 0 {
            return invalid(format!("path must start at 0, got h(0) = {}", heights[0]));
        }
        if let Some(j) = heights.windows(2).position(|w| (w[1] - w[0]).abs() != 1) {
            return invalid(format!(
                "increment h({}) - h({}) = {} is not +-1",
                j + 1,
                j,
                heights[j + 1] - heights[j]
            ));
        }
        Ok(PathConfig { heights })
    }

    pub fn n(&self) -> usize {
        self.heights.len() - 1
    }

    /// Number of up-steps, `(h(n) + n) / 2`.
    pub fn k(&self) -> usize {
        ((self.heights[self.n()] + self.n() as i64) / 2) as usize
    }

    #[inline]
    pub fn height(&self, x: usize) -> i64 {
        self.heights[x]
    }

    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    /// `f_h(i)`, the number of up-edges among the first `i` steps.
    #[inline]
    pub fn up_count(&self, i: usize) -> i64 {
        (self.heights[i] + i as i64) / 2
    }

    /// True if `h <= other` at every vertex.
    pub fn le_pointwise(&self, other: &PathConfig) -> bool {
        self.heights.len() == other.heights.len()
            && self.heights.iter().zip(&other.heights).all(|(a, b)| a <= b)
    }
}

pub fn path_from_particles(sigma: &ParticleConfig) -> PathConfig {
    let mut heights = Vec::with_capacity(sigma.n() + 1);
    let mut h = 0i64;
    heights.push(h);
    for s in 1..=sigma.n() {
        h += if sigma.is_occupied(s) { 1 } else { -1 };
        heights.push(h);
    }
    PathConfig { heights }
}

pub fn particles_from_path(h: &PathConfig) -> Result<ParticleConfig> {
    // re-validate: PathConfig can only be built through `new`, but keep the
    // operation total over its documented error case
    let h = PathConfig::new(h.heights.clone())?;
    let mut cfg = ParticleConfig::empty(h.n());
    for j in 1..=h.n() {
        if h.heights[j] > h.heights[j - 1] {
            cfg.set(j);
        }
    }
    Ok(cfg)
}

/// Colexicographic rank of a configuration among the `C(n, k)` states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateIndex(pub usize);

pub fn rank(sigma: &ParticleConfig) -> Result<StateIndex> {
    let mut r: u64 = 0;
    for (i, s) in sigma.positions().into_iter().enumerate() {
        let c = binomial(s - 1, i + 1).ok_or_else(|| {
            Error::InvalidInput(format!("rank overflows 63 bits for n = {}", sigma.n()))
        })?;
        r += c;
    }
    Ok(StateIndex(r as usize))
}

pub fn unrank(r: StateIndex, n: usize, k: usize) -> Result<ParticleConfig> {
    let total = binomial(n, k)
        .ok_or_else(|| Error::InvalidInput(format!("C({n}, {k}) overflows 63 bits")))?;
    if r.0 as u64 >= total {
        return invalid(format!("rank {} out of range 0..{total}", r.0));
    }
    let mut rem = r.0 as u64;
    let mut sites = Vec::with_capacity(k);
    let mut top = n;
    for i in (1..=k).rev() {
        // largest c < top with C(c, i) <= rem
        let mut c = top - 1;
        while binomial(c, i).unwrap_or(u64::MAX) > rem {
            c -= 1;
        }
        rem -= binomial(c, i).unwrap_or(0);
        sites.push(c + 1);
        top = c;
    }
    ParticleConfig::from_sites(n, &sites)
}

/// The two extreme configurations: all particles leftmost, all rightmost.
pub fn extreme_configs(n: usize, k: usize) -> Result<(ParticleConfig, ParticleConfig)> {
    if k > n {
        return invalid(format!("k = {k} exceeds n = {n}"));
    }
    let left: Vec<usize> = (1..=k).collect();
    let right: Vec<usize> = (n - k + 1..=n).collect();
    Ok((
        ParticleConfig::from_sites(n, &left)?,
        ParticleConfig::from_sites(n, &right)?,
    ))
}

/// The maximal path `h0(x) = x` for `x <= k`, `2k - x` beyond.
pub fn h0_config(params: &ChainParams) -> Result<PathConfig> {
    let (n, k) = (params.n(), params.k());
    if k == 0 || k >= n {
        return invalid(format!("h0 needs 1 <= k <= n - 1, got k = {k}, n = {n}"));
    }
    let heights = (0..=n as i64)
        .map(|x| if x <= k as i64 { x } else { 2 * k as i64 - x })
        .collect();
    PathConfig::new(heights)
}

/// Enumerated state space for exact work: `C(n, k)` configurations in rank order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n: usize,
    k: usize,
    configs: Vec<ParticleConfig>,
    // binom[m][i] = C(m, i) for m <= n, i <= k
    binom: Vec<Vec<u64>>,
}

impl StateSpace {
    pub fn new(n: usize, k: usize, cap: u64) -> Result<Self> {
        if k > n {
            return invalid(format!("k = {k} exceeds n = {n}"));
        }
        let states = binomial(n, k).unwrap_or(u64::MAX);
        if states > cap {
            return Err(Error::Resource { states, cap });
        }
        let binom: Vec<Vec<u64>> = (0..=n)
            .map(|m| (0..=k).map(|i| binomial(m, i).unwrap_or(0)).collect())
            .collect();
        let configs = (0..states as usize)
            .map(|r| unrank(StateIndex(r), n, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(StateSpace {
            n,
            k,
            configs,
            binom,
        })
    }

    pub fn for_params(params: &ChainParams, cap: u64) -> Result<Self> {
        StateSpace::new(params.n(), params.k(), cap)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config(&self, r: usize) -> &ParticleConfig {
        &self.configs[r]
    }

    pub fn configs(&self) -> &[ParticleConfig] {
        &self.configs
    }

    /// Table-driven colex rank.
    pub fn index_of(&self, sigma: &ParticleConfig) -> usize {
        let mut r = 0u64;
        let mut i = 0;
        for s in 1..=self.n {
            if sigma.is_occupied(s) {
                i += 1;
                r += self.binom[s - 1][i];
            }
        }
        r as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(bits: &str) -> ParticleConfig {
        ParticleConfig::from_bits(bits).unwrap()
    }

    #[test]
    fn path_examples() {
        assert_eq!(path_from_particles(&cfg("1100")).heights(), &[0, 1, 2, 1, 0]);
        assert_eq!(path_from_particles(&cfg("0000")).heights(), &[0, -1, -2, -3, -4]);
        assert_eq!(path_from_particles(&cfg("0101")).heights(), &[0, -1, 0, -1, 0]);
    }

    #[test]
    fn particles_from_path_examples() {
        let h = PathConfig::new(vec![0, 1, 2, 1, 0]).unwrap();
        assert_eq!(particles_from_path(&h).unwrap(), cfg("1100"));
        let h = PathConfig::new(vec![0, 1, 0, 1, 0]).unwrap();
        assert_eq!(particles_from_path(&h).unwrap(), cfg("1010"));
        assert!(matches!(
            PathConfig::new(vec![0, 2, 1]),
            Err(Error::InvalidInput(_))
        ));
        assert!(PathConfig::new(vec![1, 2, 1]).is_err());
    }

    #[test]
    fn rank_small() {
        let space = StateSpace::new(4, 2, DEFAULT_STATE_CAP).unwrap();
        let got: Vec<String> = space.configs().iter().map(|c| c.to_string()).collect();
        assert_eq!(got, ["1100", "1010", "0110", "1001", "0101", "0011"]);
        assert!(unrank(StateIndex(6), 4, 2).is_err());
    }

    #[test]
    fn rank_roundtrip_exhaustive() {
        for n in 2..=12 {
            for k in 0..=n {
                let space = StateSpace::new(n, k, DEFAULT_STATE_CAP).unwrap();
                assert_eq!(space.len() as u64, binomial(n, k).unwrap());
                let mut seen = std::collections::HashSet::new();
                for (r, c) in space.configs().iter().enumerate() {
                    assert_eq!(c.particle_count(), k);
                    assert_eq!(rank(c).unwrap(), StateIndex(r));
                    assert_eq!(space.index_of(c), r);
                    assert!(seen.insert(c.clone()));
                }
            }
        }
    }

    #[test]
    fn path_laws_exhaustive() {
        for n in 2..=12 {
            for k in 0..=n {
                let space = StateSpace::new(n, k, DEFAULT_STATE_CAP).unwrap();
                let params = ChainParams::new(n, k, 0.0).unwrap();
                let h0 = h0_config(&params).ok();
                for c in space.configs() {
                    let h = path_from_particles(c);
                    assert_eq!(h.height(n), 2 * k as i64 - n as i64);
                    for x in 0..=n {
                        assert_eq!(h.height(x), 2 * h.up_count(x) - x as i64);
                    }
                    assert_eq!(&particles_from_path(&h).unwrap(), c);
                    if let Some(h0) = &h0 {
                        assert!(h.le_pointwise(h0));
                    }
                }
            }
        }
    }

    #[test]
    fn extremes() {
        let (l, r) = extreme_configs(4, 2).unwrap();
        assert_eq!((l.to_string(), r.to_string()), ("1100".into(), "0011".into()));
        let (l, r) = extreme_configs(3, 1).unwrap();
        assert_eq!((l.to_string(), r.to_string()), ("100".into(), "001".into()));
        let (l, r) = extreme_configs(5, 0).unwrap();
        assert_eq!(l, r);
        assert_eq!(l.to_string(), "00000");
    }

    #[test]
    fn h0_examples() {
        let p = ChainParams::new(4, 2, 0.3).unwrap();
        assert_eq!(h0_config(&p).unwrap().heights(), &[0, 1, 2, 1, 0]);
        let p = ChainParams::new(6, 2, 0.3).unwrap();
        let h0 = h0_config(&p).unwrap();
        assert_eq!(h0.heights(), &[0, 1, 2, 1, 0, -1, -2]);
        assert_eq!(
            particles_from_path(&h0).unwrap(),
            extreme_configs(6, 2).unwrap().0
        );
        assert!(h0_config(&ChainParams::new(6, 0, 0.3).unwrap()).is_err());
        assert!(h0_config(&ChainParams::new(6, 6, 0.3).unwrap()).is_err());
    }

    #[test]
    fn derived_constants() {
        for &beta in &[0.0, 0.01, 0.2, 0.5, 0.9] {
            let c = ChainParams::new(10, 5, beta).unwrap();
            assert!((c.p() + c.q() - 1.0).abs() < 1e-15);
            assert!(c.p() >= 0.5 && c.alpha() >= 1.0);
            assert!((c.alpha().powi(2) * c.theta() - 1.0).abs() < 1e-12);
            assert!((c.alpha() - (c.p() / c.q()).sqrt()).abs() < 1e-12);
            assert!(c.delta() >= beta * beta / 2.0);
            assert!((c.delta() - (1.0 - 2.0 * (c.p() * c.q()).sqrt())).abs() < 1e-15);
            assert!(c.gamma() > 0.0 && c.gamma() < 1.0);
        }
        assert!(ChainParams::new(1, 0, 0.1).is_err());
        assert!(ChainParams::new(4, 5, 0.1).is_err());
        assert!(ChainParams::new(4, 2, 1.0).is_err());
        assert!(ChainParams::new(4, 2, -0.1).is_err());
    }

    #[test]
    fn order_statistics_across_words() {
        let n = 130;
        let c = ParticleConfig::from_sites(n, &[70, 128, 129, 130]).unwrap();
        assert_eq!(c.leftmost_particle(), Some(70));
        assert_eq!(c.rightmost_hole(), Some(127));
        let full = ParticleConfig::from_sites(3, &[1, 2, 3]).unwrap();
        assert_eq!(full.rightmost_hole(), None);
        assert_eq!(ParticleConfig::empty(64).rightmost_hole(), Some(64));
        assert_eq!(ParticleConfig::empty(64).leftmost_particle(), None);
    }
}
