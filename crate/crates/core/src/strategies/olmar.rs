//! Online moving average reversion.

use super::{dot, OnlineStrategy, Portfolio, StrategyError, DIRECTION_NORM_FLOOR};
use crate::simplex::simplex_project;

/// Moving-average price-relative prediction from the last `window` price
/// rows: `x~_i = (1/W) * sum_{k=0}^{W-1} p_{t-k,i} / p_{t,i}`.
///
/// `prices` must hold at least `window` rows; the last row is the current
/// price `p_t`.
pub fn moving_average_prediction(prices: &[Vec<f64>], window: usize) -> Vec<f64> {
    assert!(window >= 1 && prices.len() >= window, "need >= window price rows");
    let m = prices[0].len();
    let t = prices.len() - 1;
    let mut pred = vec![0.0; m];
    for k in 0..window {
        for i in 0..m {
            pred[i] += prices[t - k][i] / prices[t][i];
        }
    }
    for p in &mut pred {
        *p /= window as f64;
    }
    pred
}

/// One OLMAR step given the predicted relatives `x_pred`. Passive while
/// `w . x~ >= epsilon`; otherwise moves toward the prediction with step
/// `lambda = (epsilon - w . x~) / ||x~ - mean(x~) 1||^2` and projects.
pub fn olmar_update(
    w: &Portfolio,
    x_pred: &[f64],
    epsilon: f64,
) -> Result<Portfolio, StrategyError> {
    if w.len() != x_pred.len() {
        return Err(StrategyError::DimensionMismatch(w.len(), x_pred.len()));
    }
    if epsilon < 1.0 || !epsilon.is_finite() {
        return Err(StrategyError::InvalidParam {
            name: "epsilon".into(),
            value: epsilon,
            detail: "reversion threshold must be finite and >= 1".into(),
        });
    }
    let predicted = dot(w.weights(), x_pred);
    if predicted >= epsilon {
        return Ok(w.clone());
    }
    let mean = x_pred.iter().sum::<f64>() / x_pred.len() as f64;
    let dir: Vec<f64> = x_pred.iter().map(|&xi| xi - mean).collect();
    let norm2: f64 = dir.iter().map(|d| d * d).sum();
    if norm2 < DIRECTION_NORM_FLOOR {
        return Ok(w.clone());
    }
    let lambda = (epsilon - predicted) / norm2;
    let moved: Vec<f64> = w
        .weights()
        .iter()
        .zip(&dir)
        .map(|(wi, di)| wi + lambda * di)
        .collect();
    Ok(simplex_project(&moved)?)
}

/// Stateful OLMAR with parameters `(epsilon, window)`. The synthetic price
/// path is reconstructed from observed relatives starting at 1; the strategy
/// holds the uniform portfolio until the buffer covers the requested window.
pub struct OlmarStrategy {
    current: Portfolio,
    prices: Vec<Vec<f64>>,
    pending: bool,
}

impl OlmarStrategy {
    pub fn new(m: usize) -> Self {
        Self {
            current: Portfolio::uniform(m),
            prices: vec![vec![1.0; m]],
            pending: false,
        }
    }
}

impl OnlineStrategy for OlmarStrategy {
    fn decide(&mut self, params: &[f64]) -> Result<Portfolio, StrategyError> {
        let epsilon = params[0];
        let window = params[1].round().max(1.0) as usize;
        if self.pending {
            self.pending = false;
            if self.prices.len() >= window {
                let pred = moving_average_prediction(&self.prices, window);
                self.current = olmar_update(&self.current, &pred, epsilon)?;
            }
        }
        Ok(self.current.clone())
    }

    fn observe(&mut self, x: &[f64]) -> Result<(), StrategyError> {
        let last = self.prices.last().expect("price buffer starts non-empty");
        if x.len() != last.len() {
            return Err(StrategyError::DimensionMismatch(last.len(), x.len()));
        }
        let next: Vec<f64> = last.iter().zip(x).map(|(p, xi)| p * xi).collect();
        self.prices.push(next);
        self.pending = true;
        Ok(())
    }
}
