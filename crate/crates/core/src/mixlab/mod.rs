//! Exact worst-start mixing curves at small `n`, coupling-time upper
//! estimates at large `n`, and the regime sweep.

mod exact;
mod mc;
mod sweep;

use crate::error::{invalid, Result};

pub use exact::{
    exact_tmix, exact_tmix_capped, exact_tmix_many, exact_tv_curve, exact_tv_curve_until,
    tv_curve_from, MixingCurve, EXACT_STATE_CAP,
};
pub use mc::{coupling_times, estimate_from_outcomes, mc_tmix_upper, McConfig, McEstimate};
pub use sweep::{
    ratio_series, regime_sweep, spread, BetaRule, SweepCell, SweepConfig, SweepRecord, TmixKind,
};

/// `(1/2) sum |mu - nu|`.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return invalid(format!("dimension mismatch: {} vs {}", mu.len(), nu.len()));
    }
    for (name, d) in [("mu", mu), ("nu", nu)] {
        let total: f64 = d.iter().sum();
        if (total - 1.0).abs() > 1e-9 || d.iter().any(|&x| x < -1e-12) {
            return invalid(format!("{name} is not a probability vector (sum {total})"));
        }
    }
    Ok(tv_distance_unchecked(mu, nu))
}

pub(crate) fn tv_distance_unchecked(mu: &[f64], nu: &[f64]) -> f64 {
    0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let mu = [0.2, 0.3, 0.5];
        assert_eq!(tv_distance(&mu, &mu).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
        assert!(tv_distance(&[0.7, 0.7], &[0.5, 0.5]).is_err());
    }
}
