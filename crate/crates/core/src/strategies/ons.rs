//! Online Newton step.
//!
//! Second-order update from the online convex optimization literature:
//! accumulate gradients of the log-return and their outer products, take a
//! damped Newton step, and project onto the simplex in the norm induced by
//! the accumulated matrix. Tunable parameters are the uniform-mixing weight
//! `eta` and the gradient scale `beta`; the Newton damping `delta` is fixed
//! at 1/8.

use nalgebra::{DMatrix, DVector};

use super::{dot, OnlineStrategy, Portfolio, StrategyError};
use crate::simplex::simplex_project_metric;

pub const ONS_DELTA: f64 = 0.125;

/// Pre-projection Newton target `delta * A^{-1} b` with
/// `b = (1 + 1/beta) * grad_sum`. Exposed for tests.
pub fn ons_newton_target(
    a: &DMatrix<f64>,
    grad_sum: &DVector<f64>,
    beta: f64,
) -> Option<DVector<f64>> {
    let b = grad_sum * (1.0 + 1.0 / beta);
    a.clone().cholesky().map(|ch| ch.solve(&(b * ONS_DELTA)))
}

pub struct OnsStrategy {
    current: Portfolio,
    a: DMatrix<f64>,
    grad_sum: DVector<f64>,
    pending: Option<Vec<f64>>,
    periods_seen: usize,
}

impl OnsStrategy {
    pub fn new(m: usize) -> Self {
        Self {
            current: Portfolio::uniform(m),
            a: DMatrix::identity(m, m),
            grad_sum: DVector::zeros(m),
            pending: None,
            periods_seen: 0,
        }
    }
}

impl OnlineStrategy for OnsStrategy {
    fn decide(&mut self, params: &[f64]) -> Result<Portfolio, StrategyError> {
        let (eta, beta) = (params[0], params[1]);
        if beta <= 0.0 || !beta.is_finite() {
            return Err(StrategyError::InvalidParam {
                name: "beta".into(),
                value: beta,
                detail: "must be finite and > 0".into(),
            });
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(StrategyError::InvalidParam {
                name: "eta".into(),
                value: eta,
                detail: "mixing weight must lie in [0, 1]".into(),
            });
        }
        if let Some(x) = self.pending.take() {
            // Fold the newly revealed period into the second-order state.
            let r = dot(self.current.weights(), &x);
            let grad = DVector::from_iterator(x.len(), x.iter().map(|&xi| xi / r));
            self.a += &grad * grad.transpose();
            self.grad_sum += grad;
            self.periods_seen += 1;

            match ons_newton_target(&self.a, &self.grad_sum, beta) {
                Some(target) => {
                    let projected = simplex_project_metric(&self.a, &target)?;
                    let m = self.current.len();
                    let mixed: Vec<f64> = projected
                        .weights()
                        .iter()
                        .map(|&wi| (1.0 - eta) * wi + eta / m as f64)
                        .collect();
                    self.current = Portfolio::normalized(mixed);
                }
                // Numerical degeneracy in the solve: keep the previous
                // portfolio rather than aborting the backtest.
                None => {}
            }
        }
        Ok(self.current.clone())
    }

    fn observe(&mut self, x: &[f64]) -> Result<(), StrategyError> {
        if x.len() != self.current.len() {
            return Err(StrategyError::DimensionMismatch(self.current.len(), x.len()));
        }
        self.pending = Some(x.to_vec());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_period_is_uniform() {
        let mut s = OnsStrategy::new(3);
        assert_eq!(s.decide(&[0.0, 1.0]).unwrap(), Portfolio::uniform(3));
    }

    #[test]
    fn flat_markets_keep_uniform() {
        // With x = c 1 the gradient is proportional to the all-ones vector;
        // in the A-norm the simplex projection annuls that direction, so the
        // portfolio stays uniform through a run of flat periods.
        let mut s = OnsStrategy::new(3);
        for c in [1.0, 1.2, 0.8, 1.0] {
            let w = s.decide(&[0.0, 1.0]).unwrap();
            for &wi in w.weights() {
                assert_relative_eq!(wi, 1.0 / 3.0, epsilon = 1e-9);
            }
            s.observe(&[c, c, c]).unwrap();
        }
    }

    #[test]
    fn mixing_pulls_toward_uniform() {
        let x = [1.4, 0.7];
        let mut plain = OnsStrategy::new(2);
        let mut mixed = OnsStrategy::new(2);
        for _ in 0..5 {
            plain.decide(&[0.0, 1.0]).unwrap();
            mixed.decide(&[0.5, 1.0]).unwrap();
            plain.observe(&x).unwrap();
            mixed.observe(&x).unwrap();
        }
        let wp = plain.decide(&[0.0, 1.0]).unwrap();
        let wm = mixed.decide(&[0.5, 1.0]).unwrap();
        let dev_p = (wp.weights()[0] - 0.5).abs();
        let dev_m = (wm.weights()[0] - 0.5).abs();
        assert!(dev_m <= dev_p + 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let mut s = OnsStrategy::new(2);
        assert!(s.decide(&[0.0, 0.0]).is_err());
        assert!(s.decide(&[2.0, 1.0]).is_err());
    }
}
