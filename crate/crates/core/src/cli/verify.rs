use serde::Serialize;

use crate::configspace::{ChainParams, StateSpace, DEFAULT_STATE_CAP};
use crate::couplings::{contraction_check, path_coupling_upper_bound};
use crate::kernel::exact::{ratio, RationalKernel};
use crate::kernel::transition_matrix;
use crate::mixlab::exact_tmix_many;
use crate::spectral::{eigen_data, wilson_lower_bound};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        CheckResult {
            name: name.to_string(),
            cases: 0,
            passed: true,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.passed = false;
            if self.failures.len() < 20 {
                self.failures.push(detail());
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub max_n: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn detailed_balance(max_n: usize) -> CheckResult {
    let mut check = CheckResult::new("detailed_balance");
    for n in 2..=max_n.min(8) {
        for k in 0..=n {
            let space = StateSpace::new(n, k, DEFAULT_STATE_CAP).expect("small space");
            for (num, den) in [(1, 3), (3, 5)] {
                let rk = RationalKernel::build(&space, &ratio(num, den)).expect("valid beta");
                let bad = rk.detailed_balance_violation();
                check.record(bad.is_none(), || {
                    let (x, y) = bad.unwrap();
                    format!("n={n} k={k} beta={num}/{den}: states {x} and {y}")
                });
            }
        }
    }
    check
}

fn eigen_residual(max_n: usize) -> CheckResult {
    let mut check = CheckResult::new("eigenfunction_residual");
    for n in 4..=max_n.min(12) {
        for k in 1..n {
            for beta in [0.05, 0.2, 0.5] {
                let c = ChainParams::new(n, k, beta).expect("valid params");
                let (space, p) = transition_matrix(&c).expect("small space");
                let data = eigen_data(&space, &c).expect("beta > 0");
                let pphi = p.apply(&data.phi_values);
                let scale = data.phi_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let (worst, at) = pphi
                    .iter()
                    .zip(&data.phi_values)
                    .map(|(a, b)| (a - data.lambda2 * b).abs())
                    .enumerate()
                    .fold((0.0, 0), |acc, (i, r)| if r > acc.0 { (r, i) } else { acc });
                check.record(worst <= 1e-9 * scale, || {
                    format!("n={n} k={k} beta={beta}: residual {worst:e} at state {at}")
                });
            }
        }
    }
    check
}

fn contraction(max_n: usize) -> CheckResult {
    let mut check = CheckResult::new("path_coupling_contraction");
    for n in 2..=max_n.min(10) {
        for k in 1..n {
            for beta in [0.1, 0.5] {
                let c = ChainParams::new(n, k, beta).expect("valid params");
                let r = contraction_check(&c).expect("small space");
                check.record(r.holds(1e-12), || {
                    let (x, y) = r.worst_pair.map(|(a, b)| (a.0, b.0)).unwrap_or((0, 0));
                    format!(
                        "n={n} k={k} beta={beta}: interior dev {:e}, boundary excess {:e}, worst pair ({x}, {y})",
                        r.interior_max_dev, r.boundary_max_excess
                    )
                });
            }
        }
    }
    check
}

fn sandwich(max_n: usize) -> CheckResult {
    let mut check = CheckResult::new("sandwich");
    let eps = [0.25, 0.125];
    for n in [8, 10, 12].into_iter().filter(|&n| n <= max_n) {
        for beta in [0.1, 0.3] {
            let c = ChainParams::new(n, n / 2, beta).expect("valid params");
            let curve = match exact_tmix_many(&c, &eps, 1_000_000) {
                Ok(curve) => curve,
                Err(e) => {
                    check.record(false, || format!("n={n} beta={beta}: {e}"));
                    continue;
                }
            };
            for (e, t) in curve.tmix_eps {
                let lb = wilson_lower_bound(&c, e).expect("beta > 0").lower_bound_steps;
                let ub = path_coupling_upper_bound(&c, e).expect("beta > 0").sharper;
                let ok = t.is_some_and(|t| lb <= t as f64 && t as f64 <= ub);
                check.record(ok, || format!("n={n} beta={beta} eps={e}: {lb} <= {t:?} <= {ub}"));
            }
        }
    }
    check
}

/// Runs the small-`n` certificate grid up to `max_n`.
pub fn run_verify(max_n: usize) -> VerifyReport {
    VerifyReport {
        max_n,
        checks: vec![
            detailed_balance(max_n),
            eigen_residual(max_n),
            contraction(max_n),
            sandwich(max_n),
        ],
    }
}
