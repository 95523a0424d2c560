//! The exponential path metric and its one-step contraction under the
//! proposal coupling.

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rayon::prelude::*;
use serde::Serialize;

use crate::configspace::{
    extreme_configs, path_from_particles, ChainParams, ParticleConfig, StateIndex, StateSpace,
    DEFAULT_STATE_CAP,
};
use crate::error::{invalid, Result};
use crate::kernel::apply_move;

/// One particle-hole swap between two states, seen as flipping a diamond of
/// the path at vertex `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjacencyMove {
    pub from_state: StateIndex,
    pub to_state: StateIndex,
    pub v: usize,
    /// Height of the diamond's midpoint.
    pub h_mid: i64,
    pub weight: f64,
}

fn require_metric(params: &ChainParams) -> Result<()> {
    if params.beta() <= 0.0 {
        return invalid("the path metric needs beta > 0; at beta = 0 it degenerates to hop count");
    }
    Ok(())
}

/// `alpha^(n - k + h_mid)`.
pub fn metric_weight(mv: &AdjacencyMove, params: &ChainParams) -> Result<f64> {
    require_metric(params)?;
    Ok(diamond_weight(mv.h_mid, params))
}

fn diamond_weight(h_mid: i64, params: &ChainParams) -> f64 {
    let e = (params.n() - params.k()) as f64 + h_mid as f64;
    (e * params.ln_alpha()).exp()
}

/// All swaps out of every state, once per unordered pair (`from < to`).
pub fn adjacency_moves(space: &StateSpace, params: &ChainParams) -> Result<Vec<AdjacencyMove>> {
    require_metric(params)?;
    let n = space.n();
    let mut out = Vec::new();
    for (x, cfg) in space.configs().iter().enumerate() {
        let h = path_from_particles(cfg);
        for v in 1..n {
            if cfg.is_occupied(v) != cfg.is_occupied(v + 1) {
                let mut other = cfg.clone();
                other.swap_with_right(v);
                let y = space.index_of(&other);
                if x < y {
                    // the lower path has height h(v) - 2 at v when v is a max
                    let lo = if cfg.is_occupied(v) { h.height(v) - 2 } else { h.height(v) };
                    out.push(AdjacencyMove {
                        from_state: StateIndex(x),
                        to_state: StateIndex(y),
                        v,
                        h_mid: lo + 1,
                        weight: diamond_weight(lo + 1, params),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Shortest-path closure of the adjacency weights over one `(n, k)` space.
pub struct PathMetric {
    graph: UnGraph<(), f64>,
}

impl PathMetric {
    pub fn new(space: &StateSpace, params: &ChainParams) -> Result<Self> {
        let mut graph = UnGraph::with_capacity(space.len(), 0);
        for _ in 0..space.len() {
            graph.add_node(());
        }
        for mv in adjacency_moves(space, params)? {
            graph.add_edge(
                NodeIndex::new(mv.from_state.0),
                NodeIndex::new(mv.to_state.0),
                mv.weight,
            );
        }
        Ok(PathMetric { graph })
    }

    /// Distances from `x` to every state, in rank order.
    pub fn distances_from(&self, x: StateIndex) -> Vec<f64> {
        let map = dijkstra(&self.graph, NodeIndex::new(x.0), None, |e| *e.weight());
        let mut out = vec![f64::INFINITY; self.graph.node_count()];
        for (node, d) in map {
            out[node.index()] = d;
        }
        out
    }

    pub fn distance(&self, x: StateIndex, y: StateIndex) -> f64 {
        let target = NodeIndex::new(y.0);
        let map = dijkstra(&self.graph, NodeIndex::new(x.0), Some(target), |e| *e.weight());
        map.get(&target).copied().unwrap_or(f64::INFINITY)
    }
}

/// `rho(x, y)` by exact Dijkstra over the swap graph.
pub fn path_distance(
    space: &StateSpace,
    params: &ChainParams,
    x: StateIndex,
    y: StateIndex,
) -> Result<f64> {
    if x.0 >= space.len() || y.0 >= space.len() {
        return invalid("state index outside the space");
    }
    Ok(PathMetric::new(space, params)?.distance(x, y))
}

/// `rho(x, y)` as the weighted area between the two paths: every unit
/// diamond between them with midpoint height `m` contributes `alpha^(n-k+m)`.
pub fn cell_distance(x: &ParticleConfig, y: &ParticleConfig, params: &ChainParams) -> f64 {
    let (hx, hy) = (path_from_particles(x), path_from_particles(y));
    let mut total = 0.0;
    for v in 1..params.n() {
        let (a, b) = (hx.height(v), hy.height(v));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut m = lo + 1;
        while m < hi {
            total += diamond_weight(m, params);
            m += 2;
        }
    }
    total
}

/// `ln` of the metric diameter `alpha (alpha^k - 1)(alpha^(n-k) - 1) / (alpha - 1)^2`.
pub fn ln_diameter(params: &ChainParams) -> Result<f64> {
    require_metric(params)?;
    let (n, k, la) = (params.n(), params.k(), params.ln_alpha());
    if k == 0 || k == n {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_em1 = |x: f64| {
        if x < 30.0 {
            x.exp_m1().ln()
        } else {
            x + (-(-x).exp()).ln_1p()
        }
    };
    Ok(la + ln_em1(k as f64 * la) + ln_em1((n - k) as f64 * la) - 2.0 * ln_em1(la))
}

pub fn diameter(params: &ChainParams) -> Result<f64> {
    ln_diameter(params).map(f64::exp)
}

/// Dijkstra distance between the two extreme configurations.
pub fn diameter_dijkstra(params: &ChainParams) -> Result<f64> {
    let space = StateSpace::for_params(params, DEFAULT_STATE_CAP)?;
    let (left, right) = extreme_configs(params.n(), params.k())?;
    let metric = PathMetric::new(&space, params)?;
    Ok(metric.distance(StateIndex(space.index_of(&left)), StateIndex(space.index_of(&right))))
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub pairs: usize,
    /// `1 - delta / (n - 1)`.
    pub target: f64,
    /// Largest `E[rho(X1, Y1)] / rho(x, y)` over all adjacent pairs.
    pub max_ratio: f64,
    /// Largest `|E[rho] - rho (1 - delta/(n-1))|` over pairs with `2 <= v <= n-2`.
    pub interior_max_dev: f64,
    /// Largest `E[rho] - rho (1 - delta/(n-1))` over pairs with `v` at the boundary.
    pub boundary_max_excess: f64,
    pub worst_pair: Option<(StateIndex, StateIndex)>,
}

impl ContractionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.interior_max_dev <= tol && self.boundary_max_excess <= tol
    }
}

/// Exact one-step expected distance under the proposal coupling.
pub fn expected_next_distance(
    x: &ParticleConfig,
    y: &ParticleConfig,
    params: &ChainParams,
) -> f64 {
    let n = params.n();
    let mut total = 0.0;
    for e in 1..n {
        for (go_right, w) in [(true, params.p()), (false, params.q())] {
            let (mut x1, mut y1) = (x.clone(), y.clone());
            apply_move(&mut x1, e, go_right);
            apply_move(&mut y1, e, go_right);
            total += w * cell_distance(&x1, &y1, params);
        }
    }
    total / (n - 1) as f64
}

/// Exhaustive contraction certificate over all adjacent pairs.
pub fn contraction_check(params: &ChainParams) -> Result<ContractionReport> {
    contraction_check_capped(params, DEFAULT_STATE_CAP)
}

pub fn contraction_check_capped(params: &ChainParams, cap: u64) -> Result<ContractionReport> {
    require_metric(params)?;
    let space = StateSpace::for_params(params, cap)?;
    let moves = adjacency_moves(&space, params)?;
    let n = params.n();
    let target = 1.0 - params.delta() / (n - 1) as f64;
    let per_pair: Vec<(f64, f64, bool, AdjacencyMove)> = moves
        .par_iter()
        .map(|mv| {
            let x = space.config(mv.from_state.0);
            let y = space.config(mv.to_state.0);
            let rho = cell_distance(x, y, params);
            let next = expected_next_distance(x, y, params);
            let interior = mv.v >= 2 && mv.v + 2 <= n;
            (next / rho, next - rho * target, interior, *mv)
        })
        .collect();
    let mut report = ContractionReport {
        pairs: per_pair.len(),
        target,
        max_ratio: 0.0,
        interior_max_dev: 0.0,
        boundary_max_excess: f64::NEG_INFINITY,
        worst_pair: None,
    };
    for (ratio, dev, interior, mv) in per_pair {
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst_pair = Some((mv.from_state, mv.to_state));
        }
        if interior {
            report.interior_max_dev = report.interior_max_dev.max(dev.abs());
        } else {
            report.boundary_max_excess = report.boundary_max_excess.max(dev);
        }
    }
    if report.boundary_max_excess == f64::NEG_INFINITY {
        report.boundary_max_excess = 0.0;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PathCouplingBound {
    /// `(2n / beta^2) (ln diam + ln(1/eps))`.
    pub displayed: f64,
    /// `((n - 1) / delta) (ln diam + ln(1/eps))`.
    pub sharper: f64,
    pub diameter: f64,
    pub epsilon: f64,
}

pub fn path_coupling_upper_bound(params: &ChainParams, epsilon: f64) -> Result<PathCouplingBound> {
    require_metric(params)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let ln_diam = ln_diameter(params)?;
    let n = params.n() as f64;
    let beta = params.beta();
    let log_term = (ln_diam - epsilon.ln()).max(0.0);
    Ok(PathCouplingBound {
        displayed: 2.0 * n / (beta * beta) * log_term,
        sharper: (n - 1.0) / params.delta() * log_term,
        diameter: ln_diam.exp(),
        epsilon,
    })
}
