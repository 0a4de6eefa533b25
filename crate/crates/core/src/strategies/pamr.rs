//! Passive aggressive mean reversion.

use super::{dot, OnlineStrategy, Portfolio, StrategyError, DIRECTION_NORM_FLOOR};
use crate::simplex::simplex_project;

/// One PAMR step. Passive while `w . x <= epsilon`; otherwise moves against
/// the period's return vector with step
/// `tau = (w . x - epsilon) / ||x - mean(x) 1||^2` and projects back onto
/// the simplex. A degenerate (flat) direction is a no-op.
pub fn pamr_update(w: &Portfolio, x: &[f64], epsilon: f64) -> Result<Portfolio, StrategyError> {
    if w.len() != x.len() {
        return Err(StrategyError::DimensionMismatch(w.len(), x.len()));
    }
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(StrategyError::InvalidParam {
            name: "epsilon".into(),
            value: epsilon,
            detail: "reversion sensitivity must be finite and >= 0".into(),
        });
    }
    let r = dot(w.weights(), x);
    if r <= epsilon {
        return Ok(w.clone());
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let dir: Vec<f64> = x.iter().map(|&xi| xi - mean).collect();
    let norm2: f64 = dir.iter().map(|d| d * d).sum();
    if norm2 < DIRECTION_NORM_FLOOR {
        return Ok(w.clone());
    }
    let tau = (r - epsilon) / norm2;
    let moved: Vec<f64> = w
        .weights()
        .iter()
        .zip(&dir)
        .map(|(wi, di)| wi - tau * di)
        .collect();
    Ok(simplex_project(&moved)?)
}

pub struct PamrStrategy {
    current: Portfolio,
    pending: Option<Vec<f64>>,
}

impl PamrStrategy {
    pub fn new(m: usize) -> Self {
        Self {
            current: Portfolio::uniform(m),
            pending: None,
        }
    }
}

impl OnlineStrategy for PamrStrategy {
    fn decide(&mut self, params: &[f64]) -> Result<Portfolio, StrategyError> {
        if let Some(x) = self.pending.take() {
            self.current = pamr_update(&self.current, &x, params[0])?;
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
