//! Confidence-weighted mean reversion (deterministic mean-portfolio variant).
//!
//! Maintains a Gaussian distribution over portfolios. Each period the
//! distribution is moved the minimal Kullback-Leibler distance needed to make
//! the predicted portfolio return small with confidence controlled by `phi`
//! (a quantile multiplier; the variance form of the constraint is used). The
//! played portfolio is the mean projected onto the simplex.

use nalgebra::{DMatrix, DVector};

use super::{OnlineStrategy, Portfolio, StrategyError, DIRECTION_NORM_FLOOR};
use crate::simplex::simplex_project;

/// Reversion threshold of the probabilistic constraint
/// `mean return + phi * variance <= epsilon`. Fixed at the published value;
/// the tunable parameter is `phi`.
pub const CWMR_EPSILON: f64 = 0.5;

/// Outcome of one closed-form CWMR update.
pub struct CwmrUpdate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Lagrange multiplier of the reversion constraint (0 when inactive).
    pub lambda: f64,
}

/// Closed-form KKT solution of
/// `min KL(N(mu, sigma) || N(mu_t, sigma_t))` subject to
/// `mu . x + phi x' sigma x <= epsilon` and `1' mu = 1`:
///
/// `mu' = mu - lambda sigma (x - xbar 1)` and
/// `sigma'^{-1} = sigma^{-1} + 2 lambda phi x x'`, with `lambda` the positive
/// root of a scalar quadratic and `xbar = (1' sigma x) / (1' sigma 1)`.
pub fn cwmr_update(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    x: &[f64],
    phi: f64,
    epsilon: f64,
) -> Result<CwmrUpdate, StrategyError> {
    let m = mu.len();
    if x.len() != m {
        return Err(StrategyError::DimensionMismatch(m, x.len()));
    }
    if phi < 0.0 || !phi.is_finite() {
        return Err(StrategyError::InvalidParam {
            name: "phi".into(),
            value: phi,
            detail: "confidence multiplier must be finite and >= 0".into(),
        });
    }
    let xv = DVector::from_column_slice(x);
    let ones = DVector::from_element(m, 1.0);
    let sigma_x = sigma * &xv;
    let sigma_1 = sigma * &ones;

    let mean_ret = mu.dot(&xv);
    let variance = xv.dot(&sigma_x);
    let cross = ones.dot(&sigma_x);
    let ones_norm = ones.dot(&sigma_1);

    let unchanged = || CwmrUpdate {
        mean: mu.clone(),
        covariance: sigma.clone(),
        lambda: 0.0,
    };

    // Constraint already satisfied: zero multiplier, nothing moves.
    if mean_ret + phi * variance <= epsilon {
        return Ok(unchanged());
    }
    if variance < DIRECTION_NORM_FLOOR || ones_norm < DIRECTION_NORM_FLOOR {
        return Ok(unchanged());
    }
    let xbar = cross / ones_norm;
    let dir = &sigma_x - &sigma_1 * xbar;
    // x parallel to the all-ones direction (flat market): degenerate update.
    if dir.norm_squared() < DIRECTION_NORM_FLOOR {
        return Ok(unchanged());
    }

    // Feasibility h(lambda) = (M - eps) - lambda a_dir + phi V/(1+2 lambda phi V) = 0
    // clears denominators to a quadratic a l^2 + b l + c = 0.
    let a_dir = variance - cross * cross / ones_norm;
    let excess = mean_ret - epsilon;
    let qa = 2.0 * a_dir * phi * variance;
    let qb = a_dir - 2.0 * phi * variance * excess;
    let qc = -(excess + phi * variance);
    let lambda = if qa.abs() < 1e-300 {
        if qb.abs() < 1e-300 {
            return Ok(unchanged());
        }
        -qc / qb
    } else {
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        // Stable quadratic roots; exactly one is positive since qc < 0 < qa.
        let q = -0.5 * (qb + qb.signum() * disc);
        let r1 = q / qa;
        let r2 = if q.abs() > 0.0 { qc / q } else { f64::NEG_INFINITY };
        r1.max(r2)
    };
    let lambda = lambda.max(0.0);
    if !lambda.is_finite() || lambda == 0.0 {
        return Ok(unchanged());
    }

    let mean = mu - &dir * lambda;
    // Sherman-Morrison form of (sigma^{-1} + 2 lambda phi x x')^{-1}.
    let shrink = 2.0 * lambda * phi / (1.0 + 2.0 * lambda * phi * variance);
    let mut covariance = sigma - &sigma_x * sigma_x.transpose() * shrink;
    // Keep the state usable if the downdate lost positive definiteness.
    let degenerate = covariance
        .diagonal()
        .iter()
        .any(|&d| !d.is_finite() || d < 1e-14);
    if degenerate {
        covariance = DMatrix::identity(m, m) / (m * m) as f64;
    } else {
        // Enforce exact symmetry against floating-point drift.
        covariance = (&covariance + covariance.transpose()) * 0.5;
    }
    Ok(CwmrUpdate {
        mean,
        covariance,
        lambda,
    })
}

pub struct CwmrStrategy {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    current: Portfolio,
    pending: Option<Vec<f64>>,
}

impl CwmrStrategy {
    pub fn new(m: usize) -> Self {
        Self {
            mu: DVector::from_element(m, 1.0 / m as f64),
            sigma: DMatrix::identity(m, m) / (m * m) as f64,
            current: Portfolio::uniform(m),
            pending: None,
        }
    }
}

impl OnlineStrategy for CwmrStrategy {
    fn decide(&mut self, params: &[f64]) -> Result<Portfolio, StrategyError> {
        if let Some(x) = self.pending.take() {
            let update = cwmr_update(&self.mu, &self.sigma, &x, params[0], CWMR_EPSILON)?;
            if update.lambda > 0.0 {
                let projected = simplex_project(update.mean.as_slice())?;
                self.mu = DVector::from_column_slice(projected.weights());
                self.sigma = update.covariance;
                self.current = projected;
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
    fn inactive_constraint_leaves_state_unchanged() {
        let mu = DVector::from_vec(vec![0.5, 0.5]);
        let sigma = DMatrix::identity(2, 2) * 0.25;
        // mean return 0.3 + phi * variance small enough to satisfy eps = 0.5.
        let up = cwmr_update(&mu, &sigma, &[0.3, 0.3], 0.1, CWMR_EPSILON).unwrap();
        assert_eq!(up.lambda, 0.0);
        assert_eq!(up.mean, mu);
        assert_eq!(up.covariance, sigma);
    }

    #[test]
    fn flat_market_is_noop() {
        let mu = DVector::from_vec(vec![0.5, 0.5]);
        let sigma = DMatrix::identity(2, 2) * 0.25;
        let up = cwmr_update(&mu, &sigma, &[1.3, 1.3], 2.0, CWMR_EPSILON).unwrap();
        assert_eq!(up.lambda, 0.0);
        assert_eq!(up.mean, mu);
    }

    /// Independent check of the multiplier: bisect the feasibility equation
    /// h(lambda) = (M - eps) - lambda*a + phi*V/(1 + 2 lambda phi V) directly.
    #[test]
    fn multiplier_matches_scalar_bisection() {
        let mu = DVector::from_vec(vec![0.5, 0.5]);
        let sigma = DMatrix::identity(2, 2);
        let x = [1.2, 0.8];
        let phi = 2.0;
        let eps = CWMR_EPSILON;
        let up = cwmr_update(&mu, &sigma, &x, phi, eps).unwrap();
        assert!(up.lambda > 0.0);

        let xv = DVector::from_column_slice(&x);
        let ones = DVector::from_element(2, 1.0);
        let variance = xv.dot(&(&sigma * &xv));
        let cross = ones.dot(&(&sigma * &xv));
        let ones_norm = ones.dot(&(&sigma * &ones));
        let a = variance - cross * cross / ones_norm;
        let mean_ret = mu.dot(&xv);
        let h = |l: f64| (mean_ret - eps) - l * a + phi * variance / (1.0 + 2.0 * l * phi * variance);

        let (mut lo, mut hi) = (0.0, 1e6);
        assert!(h(lo) > 0.0 && h(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(up.lambda, 0.5 * (lo + hi), epsilon = 1e-9);

        // And the mean moved along -sigma (x - xbar 1) by that multiplier.
        let xbar = cross / ones_norm;
        let dir = &sigma * (&xv - &ones * xbar);
        let expect = &mu - &dir * up.lambda;
        for i in 0..2 {
            assert_relative_eq!(up.mean[i], expect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn covariance_stays_positive() {
        let mut s = CwmrStrategy::new(3);
        let xs = [
            [1.3, 0.8, 1.0],
            [0.7, 1.2, 1.1],
            [1.1, 1.1, 0.6],
            [1.4, 0.9, 0.9],
        ];
        for _ in 0..50 {
            for x in &xs {
                s.decide(&[2.0]).unwrap();
                s.observe(x).unwrap();
            }
        }
        let w = s.decide(&[2.0]).unwrap();
        assert!(w.weights().iter().all(|v| v.is_finite()));
        assert!(s.sigma.diagonal().iter().all(|&d| d > 0.0));
    }
}
