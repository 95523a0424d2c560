//! The labelled-particle coupling, the exponential path metric with its
//! contraction certificate, and the leftmost-particle comparison walk.

mod labelled;
mod leftmost;
mod metric;

pub use labelled::{
    coupled_step, coupling_time, labelled_run, monotone_coupling_time, run_coupling,
    CouplingKind, CouplingOutcome, LabelledPair, LabelledRun,
};
pub use leftmost::{
    lbu_start_config, leftmost_tail, leftmost_walk_sim, DelayedWalk, TailEstimate,
};
pub use metric::{
    adjacency_moves, cell_distance, contraction_check, contraction_check_capped, diameter,
    diameter_dijkstra, expected_next_distance, ln_diameter, metric_weight, path_coupling_upper_bound,
    path_distance, AdjacencyMove, ContractionReport, PathCouplingBound, PathMetric,
};
