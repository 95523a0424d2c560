//! Exact rational construction of the kernel for verification at small `n`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::configspace::StateSpace;
use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct RationalKernel {
    /// Holding probability of each state, counted edge by edge.
    pub hold: Vec<BigRational>,
    pub off: Vec<Vec<(usize, BigRational)>>,
    /// Unnormalized stationary weights `(p/q)^(sum of positions)`.
    pub weights: Vec<BigRational>,
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl RationalKernel {
    pub fn build(space: &StateSpace, beta: &BigRational) -> Result<Self> {
        if beta < &BigRational::zero() || beta >= &BigRational::one() {
            return invalid("rational beta must lie in [0, 1)");
        }
        let n = space.n();
        let two = ratio(2, 1);
        let p = (BigRational::one() + beta) / &two;
        let q = (BigRational::one() - beta) / &two;
        let per_edge = ratio(1, (n - 1) as i64);
        let p_e = &p * &per_edge;
        let q_e = &q * &per_edge;
        let r = &p / &q;

        let mut hold = Vec::with_capacity(space.len());
        let mut off = Vec::with_capacity(space.len());
        let mut weights = Vec::with_capacity(space.len());
        for x in space.configs() {
            let mut h = BigRational::zero();
            let mut row = Vec::new();
            for e in 1..n {
                match (x.is_occupied(e), x.is_occupied(e + 1)) {
                    (true, false) => {
                        let mut y = x.clone();
                        y.swap_with_right(e);
                        row.push((space.index_of(&y), p_e.clone()));
                        h += &q_e;
                    }
                    (false, true) => {
                        let mut y = x.clone();
                        y.swap_with_right(e);
                        row.push((space.index_of(&y), q_e.clone()));
                        h += &p_e;
                    }
                    _ => h += &per_edge,
                }
            }
            hold.push(h);
            off.push(row);
            weights.push(num_traits::pow(r.clone(), x.position_sum() as usize));
        }
        Ok(RationalKernel { hold, off, weights })
    }

    pub fn row_sum(&self, x: usize) -> BigRational {
        self.off[x]
            .iter()
            .fold(self.hold[x].clone(), |acc, (_, w)| acc + w)
    }

    pub fn get(&self, x: usize, y: usize) -> BigRational {
        if x == y {
            return self.hold[x].clone();
        }
        self.off[x]
            .iter()
            .filter(|(z, _)| *z == y)
            .fold(BigRational::zero(), |acc, (_, w)| acc + w)
    }

    /// First pair `(x, y)` violating `pi(x) P(x, y) = pi(y) P(y, x)`, if any.
    pub fn detailed_balance_violation(&self) -> Option<(usize, usize)> {
        for (x, row) in self.off.iter().enumerate() {
            for (y, w) in row {
                let lhs = &self.weights[x] * w;
                let rhs = &self.weights[*y] * self.get(*y, x);
                if lhs != rhs {
                    return Some((x, *y));
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{ChainParams, DEFAULT_STATE_CAP};
    use crate::kernel::TransitionMatrix;
    use num_traits::ToPrimitive;

    #[test]
    fn rows_sum_to_one_exactly() {
        for n in 2..=10 {
            for k in 0..=n {
                let space = StateSpace::new(n, k, DEFAULT_STATE_CAP).unwrap();
                for beta in [ratio(0, 1), ratio(1, 10), ratio(1, 2)] {
                    let rk = RationalKernel::build(&space, &beta).unwrap();
                    for x in 0..space.len() {
                        assert!(rk.row_sum(x).is_one(), "n={n} k={k} x={x}");
                    }
                    let params = ChainParams::new(n, k, beta.to_f64().unwrap()).unwrap();
                    let p = TransitionMatrix::build(&space, &params);
                    for x in 0..space.len() {
                        let want = rk.hold[x].to_f64().unwrap();
                        assert!((p.diagonal(x) - want).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn detailed_balance_exact() {
        for n in 2..=8 {
            for k in 0..=n {
                let space = StateSpace::new(n, k, DEFAULT_STATE_CAP).unwrap();
                for beta in [ratio(1, 3), ratio(3, 5), ratio(0, 1)] {
                    let rk = RationalKernel::build(&space, &beta).unwrap();
                    assert_eq!(rk.detailed_balance_violation(), None);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_beta() {
        let space = StateSpace::new(4, 2, DEFAULT_STATE_CAP).unwrap();
        assert!(RationalKernel::build(&space, &ratio(1, 1)).is_err());
        assert!(RationalKernel::build(&space, &ratio(-1, 2)).is_err());
    }
}
