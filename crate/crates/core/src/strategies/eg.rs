//! Exponential gradient: multiplicative weight update toward recent winners.

use super::{dot, OnlineStrategy, Portfolio, StrategyError};

/// One EG step: `w'_i ∝ w_i * exp(eta * x_i / (w . x))`.
///
/// The exponents are shifted by their maximum before exponentiation so large
/// `eta` cannot overflow. `eta = 0` and a flat `x` both return the input
/// portfolio unchanged.
pub fn eg_update(w: &Portfolio, x: &[f64], eta: f64) -> Result<Portfolio, StrategyError> {
    if w.len() != x.len() {
        return Err(StrategyError::DimensionMismatch(w.len(), x.len()));
    }
    if eta < 0.0 || !eta.is_finite() {
        return Err(StrategyError::InvalidParam {
            name: "eta".into(),
            value: eta,
            detail: "learning rate must be finite and >= 0".into(),
        });
    }
    if eta == 0.0 {
        return Ok(w.clone());
    }
    let r = dot(w.weights(), x);
    let exponents: Vec<f64> = x.iter().map(|&xi| eta * xi / r).collect();
    let max_e = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_e = exponents.iter().cloned().fold(f64::INFINITY, f64::min);
    if max_e - min_e < 1e-15 {
        return Ok(w.clone());
    }
    Ok(Portfolio::normalized(
        w.weights()
            .iter()
            .zip(&exponents)
            .map(|(wi, e)| wi * (e - max_e).exp())
            .collect(),
    ))
}

pub struct EgStrategy {
    current: Portfolio,
    pending: Option<Vec<f64>>,
}

impl EgStrategy {
    pub fn new(m: usize) -> Self {
        Self {
            current: Portfolio::uniform(m),
            pending: None,
        }
    }
}

impl OnlineStrategy for EgStrategy {
    fn decide(&mut self, params: &[f64]) -> Result<Portfolio, StrategyError> {
        if let Some(x) = self.pending.take() {
            self.current = eg_update(&self.current, &x, params[0])?;
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
    fn zero_learning_rate_is_identity() {
        let w = Portfolio::new(vec![0.3, 0.7]).unwrap();
        let out = eg_update(&w, &[1.4, 0.7], 0.0).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn flat_market_is_identity() {
        let w = Portfolio::new(vec![0.3, 0.7]).unwrap();
        let out = eg_update(&w, &[1.2, 1.2], 0.05).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn hand_evaluated_update() {
        // w = (0.5, 0.5), x = (2, 1), eta = 0.05:
        // w . x = 1.5, exponents (0.05*2/1.5, 0.05*1/1.5).
        let w = Portfolio::uniform(2);
        let out = eg_update(&w, &[2.0, 1.0], 0.05).unwrap();
        let e0 = (0.05f64 * 2.0 / 1.5).exp() * 0.5;
        let e1 = (0.05f64 * 1.0 / 1.5).exp() * 0.5;
        assert_relative_eq!(out.weights()[0], e0 / (e0 + e1), epsilon = 1e-12);
        assert_relative_eq!(out.weights()[1], e1 / (e0 + e1), epsilon = 1e-12);
    }

    #[test]
    fn huge_eta_does_not_overflow() {
        let w = Portfolio::uniform(3);
        let out = eg_update(&w, &[3.0, 0.5, 0.1], 500.0).unwrap();
        assert!(out.weights().iter().all(|v| v.is_finite()));
        assert!(out.weights()[0] > 0.999);
    }
}
