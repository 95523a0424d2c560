//! The biased exclusion transition rule: a single-step sampler for any `n`
//! and the exact transition matrix with its stationary law for small `n`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::configspace::{ChainParams, ParticleConfig, StateSpace, DEFAULT_STATE_CAP};
use crate::error::{invalid, Result};

pub mod exact;

/// One step of the chain, in place.
///
/// An edge `(e, e + 1)` is chosen uniformly among the `n - 1` edges; a lone
/// particle on it ends on the right endpoint with probability `p`.
#[inline]
pub fn step<R: Rng + ?Sized>(sigma: &mut ParticleConfig, params: &ChainParams, rng: &mut R) {
    let e = rng.gen_range(1..params.n());
    if sigma.is_occupied(e) != sigma.is_occupied(e + 1) {
        let go_right = rng.gen::<f64>() < params.p();
        apply_move(sigma, e, go_right);
    }
}

/// Places a lone particle on edge `(e, e + 1)` at `e + 1` if `go_right`,
/// else at `e`. Edges holding zero or two particles are left alone.
#[inline]
pub fn apply_move(sigma: &mut ParticleConfig, e: usize, go_right: bool) {
    if sigma.is_occupied(e) == go_right {
        sigma.swap_with_right(e);
    }
}

/// Row-stochastic transition matrix over a [`StateSpace`], stored by rows.
///
/// Each row holds at most `n - 1` off-diagonal entries; the diagonal is
/// always `1 - sum(off-diagonal)`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    dim: usize,
    diag: Vec<f64>,
    off: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn build(space: &StateSpace, params: &ChainParams) -> Self {
        let n = params.n();
        let edges = (n - 1) as f64;
        let right = params.p() / edges;
        let left = params.q() / edges;
        let mut diag = Vec::with_capacity(space.len());
        let mut off = Vec::with_capacity(space.len());
        for x in space.configs() {
            let mut row = Vec::new();
            for e in 1..n {
                match (x.is_occupied(e), x.is_occupied(e + 1)) {
                    (true, false) => {
                        let mut y = x.clone();
                        y.swap_with_right(e);
                        row.push((space.index_of(&y), right));
                    }
                    (false, true) => {
                        let mut y = x.clone();
                        y.swap_with_right(e);
                        row.push((space.index_of(&y), left));
                    }
                    _ => {}
                }
            }
            let moved: f64 = row.iter().map(|&(_, w)| w).sum();
            diag.push(1.0 - moved);
            off.push(row);
        }
        TransitionMatrix {
            dim: space.len(),
            diag,
            off,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self, x: usize) -> f64 {
        self.diag[x]
    }

    pub fn off_diagonal(&self, x: usize) -> &[(usize, f64)] {
        &self.off[x]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.diag[x];
        }
        self.off[x]
            .iter()
            .filter(|&&(z, _)| z == y)
            .map(|&(_, w)| w)
            .sum()
    }

    /// `(P f)(x) = sum_y P(x, y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|x| {
                self.diag[x] * f[x] + self.off[x].iter().map(|&(y, w)| w * f[y]).sum::<f64>()
            })
            .collect()
    }

    /// `(mu P)(y) = sum_x mu(x) P(x, y)`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.push_forward_into(mu, &mut out);
        out
    }

    pub fn push_forward_into(&self, mu: &[f64], out: &mut [f64]) {
        for (x, slot) in out.iter_mut().enumerate() {
            *slot = self.diag[x] * mu[x];
        }
        for (x, row) in self.off.iter().enumerate() {
            let m = mu[x];
            if m != 0.0 {
                for &(y, w) in row {
                    out[y] += m * w;
                }
            }
        }
    }

    pub fn row_sum(&self, x: usize) -> f64 {
        self.diag[x] + self.off[x].iter().map(|&(_, w)| w).sum::<f64>()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for x in 0..self.dim {
            m[(x, x)] = self.diag[x];
            for &(y, w) in &self.off[x] {
                m[(x, y)] += w;
            }
        }
        m
    }
}

pub fn transition_matrix(params: &ChainParams) -> Result<(StateSpace, TransitionMatrix)> {
    transition_matrix_capped(params, DEFAULT_STATE_CAP)
}

pub fn transition_matrix_capped(
    params: &ChainParams,
    cap: u64,
) -> Result<(StateSpace, TransitionMatrix)> {
    let space = StateSpace::for_params(params, cap)?;
    let p = TransitionMatrix::build(&space, params);
    Ok((space, p))
}

/// Stationary law `pi(x) ∝ (p/q)^(z_1 + ... + z_k)` over an enumerated space.
#[derive(Debug, Clone)]
pub struct StationaryDist {
    pub probs: Vec<f64>,
    pub log_z: f64,
}

/// Unnormalized log-weight `sum_i z_i log(p/q)`; usable at any `n`.
pub fn log_weight(sigma: &ParticleConfig, params: &ChainParams) -> f64 {
    2.0 * params.ln_alpha() * sigma.position_sum() as f64
}

pub fn stationary(space: &StateSpace, params: &ChainParams) -> StationaryDist {
    let logs: Vec<f64> = space
        .configs()
        .iter()
        .map(|c| log_weight(c, params))
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logs.iter().map(|l| (l - m).exp()).sum();
    let log_z = m + s.ln();
    StationaryDist {
        probs: logs.iter().map(|l| (l - log_z).exp()).collect(),
        log_z,
    }
}

/// Largest site index `j` with `j <= (1/2 - b) n`.
pub fn g_threshold(n: usize, b: f64) -> usize {
    ((0.5 - b) * n as f64 + 1e-9).floor().max(0.0) as usize
}

fn check_tail_args(params: &ChainParams, b: f64) -> Result<()> {
    if params.beta() <= 0.0 {
        return invalid("tail bounds need beta > 0 (alpha > 1); the bound is vacuous at beta = 0");
    }
    if !(b > 0.0 && b < 0.5) {
        return invalid(format!("b must lie in (0, 1/2), got {b}"));
    }
    Ok(())
}

/// `n^2 alpha^(-b n)`, the closed-form bound on `pi(G)` for
/// `G = {x : L(x) <= (1/2 - b) n}`.
pub fn tail_bound_g(params: &ChainParams, b: f64) -> Result<f64> {
    check_tail_args(params, b)?;
    let n = params.n() as f64;
    Ok((2.0 * n.ln() - b * n * params.ln_alpha()).exp())
}

/// The union bound `sum_{j <= (1/2-b)n, l >= n-k, j < l} alpha^(-2(l-j))` on
/// `pi(G)`, from which the `n^2 alpha^(-bn)` form is derived.
pub fn tail_union_bound_g(params: &ChainParams, b: f64) -> Result<f64> {
    check_tail_args(params, b)?;
    let (n, k) = (params.n(), params.k());
    let thr = g_threshold(n, b);
    if thr > n - k {
        // L(x) > R(x) becomes possible and the block bound does not apply
        return Ok(1.0);
    }
    let mut total = 0.0;
    for j in 1..=thr {
        for l in (n - k).max(j + 1)..=n {
            total += (-2.0 * (l - j) as f64 * params.ln_alpha()).exp();
        }
    }
    Ok(total.min(1.0))
}

/// Exact `pi(G)` by enumeration.
pub fn pi_g_enumerated(space: &StateSpace, pi: &StationaryDist, b: f64) -> f64 {
    let thr = g_threshold(space.n(), b);
    space
        .configs()
        .iter()
        .zip(&pi.probs)
        .filter(|(c, _)| c.leftmost_particle().is_some_and(|l| l <= thr))
        .map(|(_, w)| w)
        .sum()
}

/// Exact `pi(X_{j,l})`, the mass of `{L(x) = j, R(x) = l}`.
pub fn pi_block(space: &StateSpace, pi: &StationaryDist, j: usize, l: usize) -> f64 {
    space
        .configs()
        .iter()
        .zip(&pi.probs)
        .filter(|(c, _)| c.leftmost_particle() == Some(j) && c.rightmost_hole() == Some(l))
        .map(|(_, w)| w)
        .sum()
}

/// `ln [N choose k]_r` for `r >= 1`, via `prod (r^(N-k+i) - 1) / (r^i - 1)`.
fn ln_gaussian_binomial(big_n: usize, k: usize, ln_r: f64) -> f64 {
    if k > big_n {
        return f64::NEG_INFINITY;
    }
    let ln_rm1 = |a: f64| {
        // ln(r^a - 1), or ln(a) in the r -> 1 limit
        if ln_r == 0.0 {
            a.ln()
        } else {
            let x = a * ln_r;
            x + (-(-x).exp()).ln_1p()
        }
    };
    (1..=k)
        .map(|i| ln_rm1((big_n - k + i) as f64) - ln_rm1(i as f64))
        .sum()
}

/// Exact `pi(L(x) > m)` at any `n`, from Gaussian binomial coefficients.
pub fn pi_leftmost_exceeds(params: &ChainParams, m: usize) -> f64 {
    let (n, k) = (params.n(), params.k());
    if k == 0 {
        return 0.0;
    }
    if m + k > n {
        return 0.0;
    }
    let ln_r = 2.0 * params.ln_alpha();
    let ln = k as f64 * m as f64 * ln_r + ln_gaussian_binomial(n - m, k, ln_r)
        - ln_gaussian_binomial(n, k, ln_r);
    ln.exp().min(1.0)
}

/// Exact `pi(G)` at any `n`.
pub fn pi_g_exact(params: &ChainParams, b: f64) -> f64 {
    if params.k() == 0 {
        return 0.0;
    }
    1.0 - pi_leftmost_exceeds(params, g_threshold(params.n(), b))
}
