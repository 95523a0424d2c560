use proptest::prelude::*;
use rand::Rng;

use exclusion_lab::configspace::{
    extreme_configs, particles_from_path, path_from_particles, rank, unrank, ChainParams,
    ParticleConfig, StateIndex,
};
use exclusion_lab::couplings::{labelled_run, leftmost_walk_sim, CouplingKind, DelayedWalk};
use exclusion_lab::kernel::{step, transition_matrix};
use exclusion_lab::mixlab::{mc_tmix_upper, tv_distance, McConfig};
use exclusion_lab::spectral::single_particle_lower_bound;
use exclusion_lab::stats::stream_rng;

fn random_config(n: usize, density: f64, seed: u64) -> ParticleConfig {
    let mut rng = stream_rng(seed, 0);
    let sites: Vec<usize> = (1..=n).filter(|_| rng.gen::<f64>() < density).collect();
    ParticleConfig::from_sites(n, &sites).unwrap()
}

fn distribution(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn path_roundtrip_large(n in 1usize..=1_000_000, density in 0.0f64..=1.0, seed: u64) {
        let sigma = random_config(n, density, seed);
        let h = path_from_particles(&sigma);
        prop_assert_eq!(h.n(), n);
        prop_assert_eq!(h.k(), sigma.particle_count());
        prop_assert_eq!(particles_from_path(&h).unwrap(), sigma);
    }
}

proptest! {
    #[test]
    fn rank_unrank_inverse(n in 1usize..=40, density in 0.0f64..=1.0, seed: u64) {
        let sigma = random_config(n, density, seed);
        let r = rank(&sigma).unwrap();
        prop_assert_eq!(unrank(r, n, sigma.particle_count()).unwrap(), sigma);
    }

    #[test]
    fn unrank_rank_inverse(n in 2usize..=30, k_frac in 0.0f64..=1.0, r_frac in 0.0f64..1.0) {
        let k = ((n as f64) * k_frac).round() as usize;
        let count = exclusion_lab::configspace::binomial(n, k).unwrap() as f64;
        let r = ((count * r_frac).floor() as usize).min(count as usize - 1);
        let sigma = unrank(StateIndex(r), n, k).unwrap();
        prop_assert_eq!(rank(&sigma).unwrap(), StateIndex(r));
    }

    #[test]
    fn tv_is_a_metric(
        w in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0), 1..40)
    ) {
        let a = distribution(&w.iter().map(|t| t.0).collect::<Vec<_>>());
        let b = distribution(&w.iter().map(|t| t.1).collect::<Vec<_>>());
        let c = distribution(&w.iter().map(|t| t.2).collect::<Vec<_>>());
        let ab = tv_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - tv_distance(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!(tv_distance(&a, &a).unwrap() == 0.0);
        prop_assert!(ab <= tv_distance(&a, &c).unwrap() + tv_distance(&c, &b).unwrap() + 1e-12);
    }
}

#[test]
fn tv_rejects_mismatched_inputs() {
    assert!(tv_distance(&[0.5, 0.5], &[1.0]).is_err());
    assert!(tv_distance(&[0.5, 0.6], &[0.5, 0.5]).is_err());
}

#[test]
fn step_law_matches_matrix_row() {
    let c = ChainParams::new(5, 2, 0.2).unwrap();
    let (space, p) = transition_matrix(&c).unwrap();
    let start = ParticleConfig::from_bits("01010").unwrap();
    let row = space.index_of(&start);
    let samples = 1_000_000u64;
    let mut counts = vec![0u64; space.len()];
    let mut rng = stream_rng(5, 0);
    for _ in 0..samples {
        let mut s = start.clone();
        step(&mut s, &c, &mut rng);
        counts[space.index_of(&s)] += 1;
    }
    for (y, &count) in counts.iter().enumerate() {
        let prob = p.get(row, y);
        let freq = count as f64 / samples as f64;
        let se = (prob * (1.0 - prob) / samples as f64).sqrt();
        if prob == 0.0 {
            assert_eq!(count, 0, "impossible move to state {y}");
        } else {
            assert!((freq - prob).abs() <= 3.0 * se, "state {y}: {freq} vs {prob}");
        }
    }
}

#[test]
fn step_conserves_particles_over_long_run() {
    let c = ChainParams::new(40, 17, 0.3).unwrap();
    let mut s = ParticleConfig::from_sites(40, &(1..=17).collect::<Vec<_>>()).unwrap();
    let mut rng = stream_rng(8, 0);
    for _ in 0..1_000_000 {
        step(&mut s, &c, &mut rng);
        assert_eq!(s.particle_count(), 17);
    }
}

#[test]
fn label_times_dominated_by_biased_walk() {
    let (n, k) = (32usize, 16usize);
    let c = ChainParams::new(n, k, 1.0 / 64.0).unwrap();
    let (x, y) = extreme_configs(n, k).unwrap();
    let cap = 50_000_000u64;
    let runs = 300u64;
    let label_times: Vec<Vec<Option<u64>>> = (0..runs)
        .map(|trial| {
            let mut rng = stream_rng(21, trial);
            labelled_run(&x, &y, &c, &mut rng, cap).unwrap().label_times
        })
        .collect();
    let walk = DelayedWalk::for_params(&c);
    let walks = 4_000u64;
    let taus: Vec<Option<u64>> = (0..walks)
        .map(|trial| walk.hitting_time(n as i64, 0, cap, &mut stream_rng(22, trial)))
        .collect();
    let exceeds = |times: &mut dyn Iterator<Item = &Option<u64>>, u: u64| {
        times.filter(|t| t.is_none_or(|t| t > u)).count() as f64
    };
    let mut sorted: Vec<u64> = taus.iter().flatten().copied().collect();
    sorted.sort_unstable();
    for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let u = sorted[(q * sorted.len() as f64) as usize];
        let walk_tail = exceeds(&mut taus.iter(), u) / walks as f64;
        for label in 0..k {
            let label_tail = exceeds(&mut label_times.iter().map(|r| &r[label]), u) / runs as f64;
            let se = (label_tail * (1.0 - label_tail) / runs as f64
                + walk_tail * (1.0 - walk_tail) / walks as f64)
                .sqrt();
            assert!(
                label_tail <= walk_tail + 3.0 * se,
                "label {label} at u={u}: {label_tail} > {walk_tail} + 3*{se}"
            );
        }
    }
}

#[test]
fn leftmost_tail_within_closed_bounds() {
    let c = ChainParams::new(200, 100, 0.2).unwrap();
    let b = 0.1;
    let bound = single_particle_lower_bound(&c, b, 0.5).unwrap();
    assert!((bound.t_n - 59_700.0).abs() < 1e-6);
    let est = leftmost_walk_sim(&c, b, bound.t_n as u64, 2_000, 31).unwrap();
    let limit = bound.escape_exp + bound.chebyshev + 3.0 * est.std_err;
    assert!(est.estimate <= limit, "{} > {limit}", est.estimate);
}

#[test]
fn unbiased_mc_estimate_near_diffusive_scale() {
    let n = 16usize;
    let c = ChainParams::new(n, n / 2, 0.0).unwrap();
    let cfg = McConfig {
        epsilon: 0.25,
        trials: 2_000,
        t_cap: 100_000_000,
        kind: CouplingKind::Monotone,
        seed: 4,
        t_grid: None,
    };
    let est = mc_tmix_upper(&c, &cfg).unwrap();
    let scale = 2.0 / std::f64::consts::PI.powi(2) * (n as f64).powi(3) * (n as f64).ln();
    let r = est.t_upper as f64 / scale;
    assert!((0.125..=8.0).contains(&r), "t_upper {} vs {scale}", est.t_upper);
}
