//! The explicit second eigenfunction of the biased exclusion chain and the
//! lower bounds built on it.
//!
//! With `alpha = sqrt(p/q)` the function
//!
//! ```text
//! Phi(h) = sum_{x=1}^{n-1} (alpha^h(x) - alpha^-x a(alpha)) sin(pi x / n),
//! a(alpha) = (1 + alpha^(2k-n)) / (1 + alpha^-n)
//! ```
//!
//! satisfies `P Phi = lambda2 Phi` with
//! `lambda2 = 1 - (1 - 2 sqrt(pq) cos(pi/n)) / (n - 1)`. Everything that
//! feeds a bound calculator is evaluated in log space so that `n` in the
//! millions does not overflow `alpha^k`.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::configspace::{
    h0_config, path_from_particles, ChainParams, PathConfig, StateSpace,
};
use crate::error::{invalid, Error, Result};
use crate::kernel::{tail_union_bound_g, StationaryDist, TransitionMatrix};

fn require_bias(params: &ChainParams) -> Result<()> {
    if params.beta() <= 0.0 {
        return invalid("this quantity needs beta > 0 so that alpha > 1");
    }
    Ok(())
}

#[inline]
fn sin_frac(x: f64, n: usize) -> f64 {
    (PI * x / n as f64).sin()
}

/// `ln(e^a + e^b)`.
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    terms.into_iter().fold(f64::NEG_INFINITY, log_add)
}

/// `ln sinh(y)` for `y > 0`.
fn ln_sinh(y: f64) -> f64 {
    if y < 20.0 {
        y.sinh().ln()
    } else {
        y + (-(-2.0 * y).exp()).ln_1p() - LN_2
    }
}

/// `phi(x) = theta^(-x/2) sin(pi x / n)`, the eigenfunction of the
/// absorbed walk on `{0, ..., n}`.
pub fn phi_single(x: usize, params: &ChainParams) -> Result<f64> {
    if x > params.n() {
        return invalid(format!("site {x} outside 0..={}", params.n()));
    }
    Ok((x as f64 * params.ln_alpha()).exp() * sin_frac(x as f64, params.n()))
}

/// Eigenvalue `2 sqrt(pq) cos(pi/n)` of the absorbed walk.
pub fn single_walk_eigenvalue(params: &ChainParams) -> f64 {
    params.two_sqrt_pq() * (PI / params.n() as f64).cos()
}

/// `a(alpha) = (1 + alpha^(2k-n)) / (1 + alpha^-n)`.
pub fn a_const(params: &ChainParams) -> f64 {
    ln_a_const(params).exp()
}

fn ln_a_const(params: &ChainParams) -> f64 {
    let (n, k, la) = (params.n() as f64, params.k() as f64, params.ln_alpha());
    log_add(0.0, (2.0 * k - n) * la) - log_add(0.0, -n * la)
}

/// `c(n, k, theta) = a(theta) theta^(n/2)`.
pub fn c_const(params: &ChainParams) -> f64 {
    (ln_a_const(params) - params.n() as f64 * params.ln_alpha()).exp()
}

/// `xi(n, k, alpha) = a(theta) sum_x alpha^-x sin(pi x / n)`, the stationary mean of `Psi`.
pub fn xi_const(params: &ChainParams) -> f64 {
    let n = params.n();
    let s: f64 = (1..n)
        .map(|x| (-(x as f64) * params.ln_alpha()).exp() * sin_frac(x as f64, n))
        .sum();
    a_const(params) * s
}

/// `g*_h(i) = theta^(i - f_h(i))`.
pub fn g_star(h: &PathConfig, i: usize, params: &ChainParams) -> f64 {
    let expo = i as f64 - h.up_count(i) as f64;
    (-2.0 * params.ln_alpha() * expo).exp()
}

/// `g_h(i) = g*_h(i) - c(n, k, theta)`.
pub fn g_value(h: &PathConfig, i: usize, params: &ChainParams) -> f64 {
    g_star(h, i, params) - c_const(params)
}

/// `Psi(h) = sum_x alpha^h(x) sin(pi x / n)`.
pub fn psi_value(h: &PathConfig, params: &ChainParams) -> f64 {
    let n = params.n();
    (1..n)
        .map(|x| (h.height(x) as f64 * params.ln_alpha()).exp() * sin_frac(x as f64, n))
        .sum()
}

/// `Phi(h)` evaluated term by term.
pub fn eigenfunction_value(h: &PathConfig, params: &ChainParams) -> Result<f64> {
    require_bias(params)?;
    if h.n() != params.n() || h.k() != params.k() {
        return invalid("path does not match (n, k)");
    }
    let n = params.n();
    let (la, a) = (params.ln_alpha(), a_const(params));
    Ok((1..n)
        .map(|x| {
            let xf = x as f64;
            ((h.height(x) as f64 * la).exp() - (-xf * la).exp() * a) * sin_frac(xf, n)
        })
        .sum())
}

/// `Phi(h)` assembled as `sum_x g_h(x) phi(x)`.
pub fn eigenfunction_via_g(h: &PathConfig, params: &ChainParams) -> f64 {
    let c = c_const(params);
    (1..params.n())
        .map(|x| {
            let phi = phi_single(x, params).unwrap_or(0.0);
            (g_star(h, x, params) - c) * phi
        })
        .sum()
}

/// Closed-form second eigenvalue `1 - gamma`.
pub fn second_eigenvalue(params: &ChainParams) -> f64 {
    1.0 - params.gamma()
}

/// Second-largest eigenvalue of `P` by dense symmetric eigendecomposition of
/// `D^(1/2) P D^(-1/2)`, `D = diag(pi)`.
pub fn second_eigenvalue_numeric(p: &TransitionMatrix, pi: &StationaryDist) -> Result<f64> {
    if p.dim() < 2 {
        return invalid("a single-state chain has no second eigenvalue");
    }
    let dim = p.dim();
    let sq: Vec<f64> = pi.probs.iter().map(|w| w.sqrt()).collect();
    let mut s = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        s[(x, x)] = p.diagonal(x);
        for &(y, w) in p.off_diagonal(x) {
            s[(x, y)] += sq[x] * w / sq[y];
        }
    }
    // symmetric up to rounding; average the two triangles
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(vals[1])
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenData {
    pub lambda2: f64,
    pub gap: f64,
    /// `Phi` at every state, in rank order.
    pub phi_values: Vec<f64>,
    pub a_const: f64,
    pub c_const: f64,
    pub xi_const: f64,
}

pub fn eigen_data(space: &StateSpace, params: &ChainParams) -> Result<EigenData> {
    require_bias(params)?;
    let phi_values = space
        .configs()
        .iter()
        .map(|c| eigenfunction_value(&path_from_particles(c), params))
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenData {
        lambda2: second_eigenvalue(params),
        gap: params.gamma(),
        phi_values,
        a_const: a_const(params),
        c_const: c_const(params),
        xi_const: xi_const(params),
    })
}

fn closed_form_supported(params: &ChainParams) -> Result<()> {
    let (n, k) = (params.n(), params.k());
    if n % 2 != 0 {
        return Err(Error::UnsupportedRegime(format!(
            "closed form for Phi(h0) needs n even, got n = {n}"
        )));
    }
    if k == 0 || 2 * k > n {
        return Err(Error::UnsupportedRegime(format!(
            "closed form for Phi(h0) needs 1 <= k <= n/2, got k = {k}"
        )));
    }
    Ok(())
}

/// `ln Phi(h0)` from the paired two-sum closed form.
///
/// Terms `x` and `n - x` are paired for `x = 1..=n/2`; the self-paired
/// `x = n/2` term enters with weight 1/2.
pub fn ln_phi_h0_closed_form(params: &ChainParams) -> Result<f64> {
    require_bias(params)?;
    closed_form_supported(params)?;
    let (n, k, la) = (params.n(), params.k(), params.ln_alpha());
    let nf = n as f64;
    let half = n / 2;
    let ln_a = ln_a_const(params);
    let ln_denom = log_add(0.0, -nf * la);
    let ln_sinh_k = ln_sinh(k as f64 * la);
    let weight = |x: usize| if x == half { 0.5f64.ln() } else { 0.0 };
    let first = (1..=k).map(|x| {
        // a (alpha^x - alpha^-x)
        weight(x) + LN_2 + ln_a + ln_sinh(x as f64 * la) + sin_frac(x as f64, n).ln()
    });
    let second = (k + 1..=half).map(|x| {
        // alpha^x (alpha^2k - 1)(alpha^-2x + alpha^-n) / (1 + alpha^-n)
        let xf = x as f64;
        weight(x) + LN_2 + k as f64 * la + ln_sinh_k + log_add(-xf * la, (xf - nf) * la)
            - ln_denom
            + sin_frac(xf, n).ln()
    });
    Ok(log_sum(first.chain(second)))
}

pub fn phi_h0_closed_form(params: &ChainParams) -> Result<f64> {
    ln_phi_h0_closed_form(params).map(f64::exp)
}

/// `ln Phi(h0)` by direct summation, scaled by `alpha^-k` to stay finite.
pub fn ln_phi_h0_direct(params: &ChainParams) -> Result<f64> {
    require_bias(params)?;
    let h0 = h0_config(params)?;
    let (n, k, la) = (params.n(), params.k() as f64, params.ln_alpha());
    let a = a_const(params);
    let scaled: f64 = (1..n)
        .map(|x| {
            let xf = x as f64;
            (((h0.height(x) as f64 - k) * la).exp() - a * ((-xf - k) * la).exp())
                * sin_frac(xf, n)
        })
        .sum();
    if scaled <= 0.0 {
        return Err(Error::UnsupportedRegime(
            "Phi(h0) is not positive at these parameters".into(),
        ));
    }
    Ok(k * la + scaled.ln())
}

/// `ln Phi(h0)`: closed form where it applies, direct summation otherwise.
pub fn ln_phi_h0(params: &ChainParams) -> Result<f64> {
    match ln_phi_h0_closed_form(params) {
        Err(Error::UnsupportedRegime(_)) => ln_phi_h0_direct(params),
        other => other,
    }
}

/// Lower bound `(sin(pi b/n)/2) alpha^k (alpha - alpha^-(k-b))(1 - alpha^-(b+k)) / (alpha - 1)`
/// on `Phi(h0)`.
pub fn phi_h0_lower_bound(params: &ChainParams, b: f64) -> Result<f64> {
    require_bias(params)?;
    let (k, a) = (params.k() as f64, params.alpha());
    Ok(sin_frac(b, params.n()) / 2.0 * a.powf(k) * (a - a.powf(-(k - b))) * (1.0 - a.powf(-(b + k)))
        / (a - 1.0))
}

/// `ln R` with `sqrt(R) = 2 alpha^k (alpha - 1)`.
pub fn ln_r_bound(params: &ChainParams) -> Result<f64> {
    require_bias(params)?;
    let la = params.ln_alpha();
    Ok(2.0 * (LN_2 + params.k() as f64 * la + la.exp_m1().ln()))
}

pub fn r_bound(params: &ChainParams) -> Result<f64> {
    ln_r_bound(params).map(f64::exp)
}

#[derive(Debug, Clone, Serialize)]
pub struct WilsonReport {
    pub phi_h0: f64,
    pub ln_phi_h0: f64,
    pub r_bound: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub lower_bound_steps: f64,
    pub epsilon: f64,
}

/// Eigenfunction lower bound on `t_mix(eps)` started from `h0`; vacuous
/// bounds clamp to 0.
pub fn wilson_lower_bound(params: &ChainParams, epsilon: f64) -> Result<WilsonReport> {
    require_bias(params)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let ln_phi = ln_phi_h0(params)?;
    let ln_r = ln_r_bound(params)?;
    let gap = params.gamma();
    let lambda = 1.0 - gap;
    let raw = if lambda <= 0.5 {
        // the method needs 1/2 < lambda < 1
        0.0
    } else {
        let log_inv_lambda = -(-gap).ln_1p();
        (gap.ln() + 2.0 * ln_phi - LN_2 - ln_r + ((1.0 - epsilon) / epsilon).ln())
            / (2.0 * log_inv_lambda)
    };
    Ok(WilsonReport {
        phi_h0: ln_phi.exp(),
        ln_phi_h0: ln_phi,
        r_bound: ln_r.exp(),
        lambda2: lambda,
        gap,
        lower_bound_steps: if raw.is_nan() { 0.0 } else { raw.max(0.0) },
        epsilon,
    })
}

/// The three mixing regimes, tagged by `n beta` against `1` and `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `n beta <= 1`: `t_mix ≍ n^3 log n`.
    #[serde(rename = "i")]
    Diffusive,
    /// `1 < n beta <= log n`: `t_mix ≍ n log n / beta^2`.
    #[serde(rename = "ii")]
    Intermediate,
    /// `n beta > log n`: `t_mix ≍ n^2 / beta`.
    #[serde(rename = "iii")]
    Ballistic,
}

impl Regime {
    pub fn classify(n: usize, beta: f64) -> Regime {
        let nb = n as f64 * beta;
        let tol = 1e-12;
        if nb <= 1.0 + tol {
            Regime::Diffusive
        } else if nb <= (n as f64).ln() * (1.0 + tol) {
            Regime::Intermediate
        } else {
            Regime::Ballistic
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Diffusive => "i",
            Regime::Intermediate => "ii",
            Regime::Ballistic => "iii",
        }
    }

    /// The order-of-magnitude scale: `n^3 ln n`, `n ln n / beta^2`, or `n^2 / beta`.
    pub fn scale(&self, n: usize, beta: f64) -> f64 {
        let nf = n as f64;
        match self {
            Regime::Diffusive => nf.powi(3) * nf.ln(),
            Regime::Intermediate => nf * nf.ln() / (beta * beta),
            Regime::Ballistic => nf * nf / beta,
        }
    }
}

/// Leading-order asymptotic lower bound for regimes (i) and (ii).
///
/// Not a finite-n certificate.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeBound {
    pub regime: Regime,
    pub value: f64,
    pub asymptotic_guide: bool,
}

pub fn regime_lower_bounds(params: &ChainParams, epsilon: f64) -> Result<RegimeBound> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let (n, beta) = (params.n() as f64, params.beta());
    let log_term = n.ln() + ((1.0 - epsilon) / epsilon).ln();
    let regime = Regime::classify(params.n(), beta);
    let value = match regime {
        Regime::Diffusive => {
            let zeta = n * beta;
            n.powi(3) / (PI * PI + zeta * zeta) * log_term
        }
        Regime::Intermediate => n / (beta * beta) * log_term,
        Regime::Ballistic => {
            return Err(Error::UnsupportedRegime(format!(
                "n beta = {} exceeds ln n = {}; use single_particle_lower_bound",
                n * beta,
                n.ln()
            )))
        }
    };
    Ok(RegimeBound {
        regime,
        value,
        asymptotic_guide: true,
    })
}

/// Ingredients of the leftmost-particle lower bound at
/// `t_n = (1 - 4b)(n - 1) n / (2 beta)`.
#[derive(Debug, Clone, Serialize)]
pub struct SingleParticleBound {
    pub t_n: f64,
    pub b: f64,
    /// Gambler's-ruin escape probability `(q/p)^(bn/2)`.
    pub escape: f64,
    /// Its exponential majorant `e^(-beta b n)`.
    pub escape_exp: f64,
    /// Chebyshev tail `4(1 - 4b) / (b^2 beta n)`.
    pub chebyshev: f64,
    /// `(1 - slack) n^2 / (2 beta)`.
    pub slack_target: f64,
    pub covers_slack: bool,
}

impl SingleParticleBound {
    /// `t_n` if `1 - escape - chebyshev - pi(G)` certifies `d(t_n) >= eps`.
    pub fn certified(&self, params: &ChainParams, epsilon: f64) -> Option<f64> {
        let pi_g = tail_union_bound_g(params, self.b).ok()?;
        let d_lower = 1.0 - self.escape - self.chebyshev.min(1.0) - pi_g;
        (d_lower >= epsilon).then_some(self.t_n)
    }
}

pub fn single_particle_lower_bound(
    params: &ChainParams,
    b: f64,
    delta_slack: f64,
) -> Result<SingleParticleBound> {
    require_bias(params)?;
    if !(b > 0.0 && b <= 0.125) {
        return invalid(format!("b must lie in (0, 1/8], got {b}"));
    }
    if !(delta_slack > 0.0 && delta_slack < 1.0) {
        return invalid(format!("slack must lie in (0, 1), got {delta_slack}"));
    }
    let (n, beta) = (params.n() as f64, params.beta());
    let t_n = (1.0 - 4.0 * b) * (n - 1.0) * n / (2.0 * beta);
    let slack_target = (1.0 - delta_slack) * n * n / (2.0 * beta);
    Ok(SingleParticleBound {
        t_n,
        b,
        escape: (-2.0 * params.ln_alpha() * b * n / 2.0).exp(),
        escape_exp: (-beta * b * n).exp(),
        chebyshev: 4.0 * (1.0 - 4.0 * b) / (b * b * beta * n),
        slack_target,
        covers_slack: t_n >= slack_target,
    })
}
