//! Benchmark portfolios: uniform buy-and-hold, best stock in hindsight, and
//! the best constant rebalanced portfolio.

use super::{dot, OnlineStrategy, Portfolio, StrategyError};
use crate::market::PriceRelativeSeries;
use crate::simplex::simplex_project;

/// Buy-and-hold drift: holding `w` through a period with relatives `x`
/// leaves the position `w_i * x_i`, renormalized to proportions.
pub fn drift_update(w: &Portfolio, x: &[f64]) -> Result<Portfolio, StrategyError> {
    if w.len() != x.len() {
        return Err(StrategyError::DimensionMismatch(w.len(), x.len()));
    }
    Ok(Portfolio::normalized(
        w.weights().iter().zip(x).map(|(wi, xi)| wi * xi).collect(),
    ))
}

/// Buy-and-hold of the uniform portfolio; weights drift with returns.
pub struct MarketStrategy {
    current: Portfolio,
}

impl MarketStrategy {
    pub fn new(m: usize) -> Self {
        Self {
            current: Portfolio::uniform(m),
        }
    }
}

impl OnlineStrategy for MarketStrategy {
    fn decide(&mut self, _params: &[f64]) -> Result<Portfolio, StrategyError> {
        Ok(self.current.clone())
    }

    fn observe(&mut self, x: &[f64]) -> Result<(), StrategyError> {
        self.current = drift_update(&self.current, x)?;
        Ok(())
    }
}

/// Unit weight on the asset with the highest cumulative return over the
/// full series; ties broken by lowest index. Hindsight benchmark.
pub fn best_stock(series: &PriceRelativeSeries) -> Result<Portfolio, StrategyError> {
    if series.num_days() == 0 {
        return Err(StrategyError::EmptySeries);
    }
    let m = series.num_assets();
    // Sum of logs avoids overflow on long series.
    let mut log_growth = vec![0.0f64; m];
    for row in series.rows() {
        for (g, &x) in log_growth.iter_mut().zip(row) {
            *g += x.ln();
        }
    }
    let mut best = 0;
    for i in 1..m {
        if log_growth[i] > log_growth[best] {
            best = i;
        }
    }
    Ok(Portfolio::vertex(m, best))
}

/// Best constant rebalanced portfolio: the fixed weight vector maximizing
/// cumulative log-wealth over the full series. Hindsight benchmark.
///
/// Solved by projected gradient ascent with Barzilai-Borwein steps and an
/// Armijo backtracking fallback; the objective is smooth and concave on the
/// simplex.
pub fn bcrp(series: &PriceRelativeSeries) -> Result<Portfolio, StrategyError> {
    if series.num_days() == 0 {
        return Err(StrategyError::EmptySeries);
    }
    let m = series.num_assets();
    let rows: Vec<&[f64]> = series.rows().collect();

    let objective = |w: &[f64]| -> f64 { rows.iter().map(|x| dot(w, x).ln()).sum() };
    let gradient = |w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; m];
        for x in &rows {
            let r = dot(w, x);
            for i in 0..m {
                g[i] += x[i] / r;
            }
        }
        g
    };
    // Stationarity on the simplex: the projected-gradient residual
    // || P(w + s g) - w || / s with a small probe step.
    let residual = |w: &[f64], g: &[f64]| -> f64 {
        let s = 1e-4;
        let probe: Vec<f64> = w.iter().zip(g).map(|(wi, gi)| wi + s * gi).collect();
        let p = simplex_project(&probe).expect("finite probe");
        p.weights()
            .iter()
            .zip(w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / s
    };

    let max_iters = 200_000;
    let tol = 1e-10;
    let mut w: Vec<f64> = Portfolio::uniform(m).weights().to_vec();
    let mut f = objective(&w);
    let mut g = gradient(&w);
    let mut step = 1.0 / (1.0 + rows.len() as f64);
    let mut prev_w: Option<Vec<f64>> = None;
    let mut prev_g: Option<Vec<f64>> = None;

    for iter in 0..max_iters {
        if residual(&w, &g) < tol {
            return Ok(Portfolio::normalized(w));
        }
        // Barzilai-Borwein step from the last displacement pair.
        if let (Some(pw), Some(pg)) = (&prev_w, &prev_g) {
            let sy: f64 = w
                .iter()
                .zip(pw)
                .zip(g.iter().zip(pg))
                .map(|((wi, pwi), (gi, pgi))| (wi - pwi) * (gi - pgi))
                .sum();
            let ss: f64 = w.iter().zip(pw).map(|(wi, pwi)| (wi - pwi).powi(2)).sum();
            if sy < -1e-18 && ss > 0.0 {
                step = (ss / -sy).clamp(1e-12, 1e6);
            }
        }
        // Armijo backtracking on the ascent step.
        let mut accepted = false;
        let mut s = step;
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi + s * gi).collect();
            let p = simplex_project(&trial)?;
            let fp = objective(p.weights());
            let decrease: f64 = p
                .weights()
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            if fp >= f + 1e-4 / s * decrease - 1e-18 {
                prev_w = Some(std::mem::replace(&mut w, p.weights().to_vec()));
                prev_g = Some(std::mem::replace(&mut g, gradient(&w)));
                f = fp;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // Line-search stagnation at machine precision: accept the
            // iterate if it is stationary, otherwise report non-convergence.
            if residual(&w, &g) < 1e-7 {
                return Ok(Portfolio::normalized(w));
            }
            return Err(StrategyError::NonConvergence(iter));
        }
    }
    Err(StrategyError::NonConvergence(max_iters))
}
