//! Performance measures for a backtested return trajectory: cumulative
//! wealth, annualized yield and volatility, maximum drawdown, Sharpe and
//! Calmar ratios, and the active-return t-test against the market.
//!
//! Undefined ratios (zero volatility, zero drawdown, zero active-return
//! variance) are reported as signed-infinity sentinels rather than errors so
//! summaries stay one row per run.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trajectory must contain at least {needed} returns, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-positive gross return {value} at period {period}")]
    NonPositiveReturn { period: usize, value: f64 },
    #[error("trajectories differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Per-period gross portfolio returns plus the annualization convention.
#[derive(Debug, Clone)]
pub struct ReturnTrajectory {
    gross_returns: Vec<f64>,
    periods_per_year: usize,
}

impl ReturnTrajectory {
    pub fn new(gross_returns: Vec<f64>, periods_per_year: usize) -> Result<Self, MetricsError> {
        if gross_returns.is_empty() {
            return Err(MetricsError::TooShort { needed: 1, got: 0 });
        }
        for (t, &r) in gross_returns.iter().enumerate() {
            if !r.is_finite() || r <= 0.0 {
                return Err(MetricsError::NonPositiveReturn { period: t, value: r });
            }
        }
        Ok(Self {
            gross_returns,
            periods_per_year: periods_per_year.max(1),
        })
    }

    /// Daily data convention: 252 trading periods per year.
    pub fn daily(gross_returns: Vec<f64>) -> Result<Self, MetricsError> {
        Self::new(gross_returns, 252)
    }

    pub fn gross_returns(&self) -> &[f64] {
        &self.gross_returns
    }

    pub fn periods_per_year(&self) -> usize {
        self.periods_per_year
    }

    pub fn len(&self) -> usize {
        self.gross_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gross_returns.is_empty()
    }

    /// Wealth curve starting at 1.0, length T+1.
    pub fn wealth_curve(&self) -> Vec<f64> {
        let mut curve = Vec::with_capacity(self.len() + 1);
        let mut w = 1.0;
        curve.push(w);
        for &r in &self.gross_returns {
            w *= r;
            curve.push(w);
        }
        curve
    }
}

/// The six comparison measures plus the skill t-test against the market.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSummary {
    pub cumulative_wealth: f64,
    pub apy: f64,
    pub ann_std: f64,
    pub max_drawdown: f64,
    pub sharpe: f64,
    pub calmar: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// Final wealth from a $1 start: the product of gross returns.
pub fn cumulative_wealth(traj: &ReturnTrajectory) -> f64 {
    traj.gross_returns.iter().product()
}

/// Compound annual growth rate: `CW^(periods_per_year / T) - 1`.
pub fn apy(traj: &ReturnTrajectory) -> f64 {
    let cw = cumulative_wealth(traj);
    cw.powf(traj.periods_per_year as f64 / traj.len() as f64) - 1.0
}

/// Sample standard deviation of net returns scaled by sqrt(periods/year).
pub fn ann_std(traj: &ReturnTrajectory) -> Result<f64, MetricsError> {
    let n = traj.len();
    if n < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: n });
    }
    let nets: Vec<f64> = traj.gross_returns.iter().map(|r| r - 1.0).collect();
    let mean = nets.iter().sum::<f64>() / n as f64;
    let var = nets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt() * (traj.periods_per_year as f64).sqrt())
}

/// Largest peak-to-trough fraction lost on the wealth curve, in [0, 1).
pub fn max_drawdown(traj: &ReturnTrajectory) -> f64 {
    let mut peak = 1.0f64;
    let mut worst = 0.0f64;
    let mut wealth = 1.0f64;
    for &r in &traj.gross_returns {
        wealth *= r;
        if wealth > peak {
            peak = wealth;
        }
        worst = worst.max((peak - wealth) / peak);
    }
    worst
}

/// Annualized Sharpe ratio `(apy - risk_free) / ann_std`. Zero volatility
/// yields a signed-infinity sentinel (0 if the excess return is also 0).
pub fn sharpe(traj: &ReturnTrajectory, risk_free_annual: f64) -> Result<f64, MetricsError> {
    let vol = ann_std(traj)?;
    let excess = apy(traj) - risk_free_annual;
    if vol == 0.0 {
        return Ok(if excess == 0.0 {
            0.0
        } else {
            excess.signum() * f64::INFINITY
        });
    }
    Ok(excess / vol)
}

/// Calmar ratio `apy / max_drawdown`. Zero drawdown yields a
/// signed-infinity sentinel (0 if apy is also 0).
pub fn calmar(traj: &ReturnTrajectory) -> f64 {
    let dd = max_drawdown(traj);
    let growth = apy(traj);
    if dd == 0.0 {
        return if growth == 0.0 {
            0.0
        } else {
            growth.signum() * f64::INFINITY
        };
    }
    growth / dd
}

/// One-sided t-test of the strategy's active return over the market.
///
/// Active returns are per-period differences of net returns; the statistic
/// is `mean / (std / sqrt(T))` with T-1 degrees of freedom, and the p-value
/// is the upper tail (the skill hypothesis is directional). Zero variance
/// with a nonzero mean yields `t = +/-inf` with `p = 0` or `1`.
pub fn active_return_ttest(
    strategy: &ReturnTrajectory,
    market: &ReturnTrajectory,
) -> Result<(f64, f64), MetricsError> {
    let n = strategy.len();
    if n != market.len() {
        return Err(MetricsError::LengthMismatch(n, market.len()));
    }
    if n < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: n });
    }
    let active: Vec<f64> = strategy
        .gross_returns
        .iter()
        .zip(&market.gross_returns)
        .map(|(s, m)| s - m)
        .collect();
    let mean = active.iter().sum::<f64>() / n as f64;
    let var = active.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(if mean == 0.0 {
            (0.0, 0.5)
        } else if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        });
    }
    let t = mean / (std / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    let p = 1.0 - dist.cdf(t);
    Ok((t, p))
}

/// All measures for one run, with the t-test taken against `market`.
pub fn summarize(
    strategy: &ReturnTrajectory,
    market: &ReturnTrajectory,
    risk_free_annual: f64,
) -> Result<PerformanceSummary, MetricsError> {
    let (t_stat, p_value) = active_return_ttest(strategy, market)?;
    Ok(PerformanceSummary {
        cumulative_wealth: cumulative_wealth(strategy),
        apy: apy(strategy),
        ann_std: ann_std(strategy)?,
        max_drawdown: max_drawdown(strategy),
        sharpe: sharpe(strategy, risk_free_annual)?,
        calmar: calmar(strategy),
        t_stat,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn traj(returns: &[f64]) -> ReturnTrajectory {
        ReturnTrajectory::daily(returns.to_vec()).unwrap()
    }

    #[test]
    fn wealth_basics() {
        assert_relative_eq!(cumulative_wealth(&traj(&[1.0, 1.0, 1.0])), 1.0);
        assert_relative_eq!(cumulative_wealth(&traj(&[1.1, 0.9])), 0.99, epsilon = 1e-15);
    }

    #[test]
    fn apy_definitions() {
        assert_relative_eq!(apy(&traj(&[1.0; 10])), 0.0, epsilon = 1e-15);
        // CW = 2 over exactly one year doubles: APY = 1.
        let one_year = vec![2f64.powf(1.0 / 252.0); 252];
        assert_relative_eq!(apy(&ReturnTrajectory::daily(one_year).unwrap()), 1.0, epsilon = 1e-10);
        // CW = 1.21 over two years: APY = 0.10.
        let two_years = vec![1.21f64.powf(1.0 / 504.0); 504];
        assert_relative_eq!(apy(&ReturnTrajectory::daily(two_years).unwrap()), 0.10, epsilon = 1e-10);
    }

    #[test]
    fn ann_std_two_point() {
        let t = traj(&[1.01, 0.99]);
        let expected = 0.02f64 / 2f64.sqrt() * 252f64.sqrt();
        assert_relative_eq!(ann_std(&t).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(ann_std(&t).unwrap(), 0.2245, epsilon = 1e-4);
        assert!(ann_std(&traj(&[1.0])).is_err());
    }

    #[test]
    fn ann_std_properties() {
        assert_relative_eq!(ann_std(&traj(&[1.05; 30])).unwrap(), 0.0, epsilon = 1e-12);
        // Scaling net returns by c scales the result by |c|.
        let base = [0.01, -0.02, 0.015, 0.0, -0.005];
        let t1 = traj(&base.map(|n| 1.0 + n));
        let t3 = traj(&base.map(|n| 1.0 + 3.0 * n));
        assert_relative_eq!(3.0 * ann_std(&t1).unwrap(), ann_std(&t3).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn drawdown_cases() {
        assert_relative_eq!(max_drawdown(&traj(&[1.1, 1.2, 1.05])), 0.0);
        // Wealth path 1 -> 2 -> 1 -> 3: worst fall is 2 to 1.
        assert_relative_eq!(max_drawdown(&traj(&[2.0, 0.5, 3.0])), 0.5, epsilon = 1e-15);
        assert_relative_eq!(max_drawdown(&traj(&[1.0; 5])), 0.0);
    }

    #[test]
    fn drawdown_is_order_sensitive_wealth_is_not() {
        let a = traj(&[2.0, 0.5, 3.0]);
        let b = traj(&[0.5, 2.0, 3.0]);
        assert_relative_eq!(cumulative_wealth(&a), cumulative_wealth(&b), epsilon = 1e-12);
        assert_relative_eq!(max_drawdown(&a), 0.5, epsilon = 1e-15);
        assert_relative_eq!(max_drawdown(&b), 0.5, epsilon = 1e-15);
        let c = traj(&[3.0, 2.0, 0.5]);
        assert_relative_eq!(max_drawdown(&c), 0.5, epsilon = 1e-15);
        let d = traj(&[0.5, 3.0, 2.0]);
        assert_relative_eq!(max_drawdown(&d), 0.5, epsilon = 1e-15);
        // A genuinely different ordering changes the drawdown.
        let e = traj(&[2.0, 3.0, 0.5]);
        assert_relative_eq!(max_drawdown(&e), 0.5, epsilon = 1e-15);
        let f = traj(&[0.5, 0.5, 8.0]);
        let g = traj(&[0.5, 8.0, 0.5]);
        assert_relative_eq!(cumulative_wealth(&f), cumulative_wealth(&g), epsilon = 1e-12);
        assert!((max_drawdown(&f) - max_drawdown(&g)).abs() > 0.1);
    }

    #[test]
    fn sharpe_cases() {
        // apy == risk-free: zero.
        let t = traj(&[1.01, 0.99, 1.02, 0.98]);
        let growth = apy(&t);
        assert_relative_eq!(sharpe(&t, growth).unwrap(), 0.0, epsilon = 1e-12);
        // Zero volatility sentinel.
        let flat = traj(&[1.001; 10]);
        assert!(sharpe(&flat, 0.0).unwrap().is_infinite());
        assert_relative_eq!(sharpe(&traj(&[1.0; 10]), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn calmar_cases() {
        // apy 0.2, MDD 0.1 -> 2.0 checked through a constructed path:
        // direct ratio identity instead, since apy depends on horizon.
        let t = traj(&[0.9, 1.3, 1.1, 0.95]);
        let expected = apy(&t) / max_drawdown(&t);
        assert_relative_eq!(calmar(&t), expected, epsilon = 1e-12);
        assert!(calmar(&traj(&[1.1, 1.1])).is_infinite());
        assert_relative_eq!(calmar(&traj(&[1.0, 1.0])), 0.0);
    }

    #[test]
    fn ttest_identical_is_centered() {
        let t = traj(&[1.01, 0.99, 1.03]);
        let (stat, p) = active_return_ttest(&t, &t).unwrap();
        assert_relative_eq!(stat, 0.0);
        assert_relative_eq!(p, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ttest_constant_edge_is_degenerate() {
        let market = traj(&[1.0; 100]);
        let strat = traj(&[1.001; 100]);
        let (stat, p) = active_return_ttest(&strat, &market).unwrap();
        assert!(stat.is_infinite() && stat > 0.0);
        assert_relative_eq!(p, 0.0);
    }

    #[test]
    fn ttest_sign_follows_mean() {
        let market = traj(&[1.00, 1.01, 0.99, 1.02]);
        let better = traj(&[1.01, 1.015, 0.995, 1.02]);
        let (stat, p) = active_return_ttest(&better, &market).unwrap();
        assert!(stat > 0.0 && p < 0.5);
        let (stat2, p2) = active_return_ttest(&market, &better).unwrap();
        assert!(stat2 < 0.0 && p2 > 0.5);
        assert_relative_eq!(stat, -stat2, epsilon = 1e-12);
    }

    #[test]
    fn non_positive_returns_rejected() {
        assert!(ReturnTrajectory::daily(vec![1.0, 0.0]).is_err());
        assert!(ReturnTrajectory::daily(vec![-0.5]).is_err());
        assert!(ReturnTrajectory::daily(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn apy_consistent_with_cw(
            returns in proptest::collection::vec(0.8f64..1.25, 1..100),
            ppy in 1usize..400,
        ) {
            let t = ReturnTrajectory::new(returns, ppy).unwrap();
            let cw = cumulative_wealth(&t);
            let back = (1.0 + apy(&t)).powf(t.len() as f64 / ppy as f64);
            prop_assert!((back - cw).abs() <= 1e-12 * cw.max(1.0));
        }

        #[test]
        fn drawdown_bounded_wealth_positive(
            returns in proptest::collection::vec(0.5f64..2.0, 1..200),
        ) {
            let t = ReturnTrajectory::daily(returns).unwrap();
            let dd = max_drawdown(&t);
            prop_assert!((0.0..1.0).contains(&dd));
            prop_assert!(cumulative_wealth(&t) > 0.0);
        }

        #[test]
        fn wealth_is_permutation_invariant(
            returns in proptest::collection::vec(0.8f64..1.3, 2..50),
        ) {
            let mut rev = returns.clone();
            rev.reverse();
            let a = cumulative_wealth(&ReturnTrajectory::daily(returns).unwrap());
            let b = cumulative_wealth(&ReturnTrajectory::daily(rev).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
