//! Backtest orchestration: the sequential trading loop for static and
//! oracle-tuned strategies.
//!
//! Causality: for non-benchmark strategies the portfolio for period `t` is a
//! deterministic function of data through period `t-1` and the seed; market
//! returns are revealed only after the portfolio is committed. Hindsight
//! benchmarks (BS, BCRP) are computed from the full series and flagged.

use thiserror::Error;

use crate::config::{DatasetSpec, ExperimentConfig, MetricOptions};
use crate::market::{MarketError, PriceRelativeSeries};
use crate::metrics::{summarize, MetricsError, PerformanceSummary, ReturnTrajectory};
use crate::oracle::{ConfigOracle, OracleConfig, OracleError, OracleTraceRecord};
use crate::strategies::{
    benchmark_portfolio, make_strategy, period_return, FixedStrategy, OnlineStrategy,
    StrategyError, StrategyKind,
};
use crate::synthetic;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("strategy expects {expected} parameters, config supplies {got}")]
    ParamShape { expected: usize, got: usize },
}

/// Everything a finished run reports: the wealth curve (starting at 1.0),
/// the per-period returns, the oracle trace when tuning was on, and the
/// summary measures computed against the uniform buy-and-hold market.
#[derive(Debug)]
pub struct BacktestReport {
    pub name: String,
    pub dataset_name: String,
    pub hindsight: bool,
    pub seed: u64,
    pub wealth: Vec<f64>,
    pub trajectory: ReturnTrajectory,
    pub market_trajectory: ReturnTrajectory,
    pub summary: PerformanceSummary,
    pub params_trace: Vec<Vec<f64>>,
    pub oracle_trace: Vec<OracleTraceRecord>,
    /// Number of leading warm-up periods excluded from the summary (0 unless
    /// `exclude_warmup` was set on an oracle run).
    pub warmup_excluded: usize,
}

impl BacktestReport {
    /// Wealth recursion invariant: `wealth[t] = wealth[t-1] * gross[t]`.
    pub fn check_wealth_recursion(&self) -> bool {
        if self.wealth.len() != self.trajectory.len() + 1 || self.wealth[0] != 1.0 {
            return false;
        }
        self.trajectory
            .gross_returns()
            .iter()
            .enumerate()
            .all(|(t, r)| {
                let expect = self.wealth[t] * r;
                (self.wealth[t + 1] - expect).abs() <= 1e-12 * expect.abs().max(1.0)
            })
    }
}

/// Gross returns of the uniform buy-and-hold market portfolio.
fn market_returns(series: &PriceRelativeSeries) -> Result<Vec<f64>, BacktestError> {
    let mut strat = crate::strategies::MarketStrategy::new(series.num_assets());
    let mut out = Vec::with_capacity(series.num_days());
    for t in 0..series.num_days() {
        let w = strat.decide(&[])?;
        let x = series.row(t);
        out.push(period_return(&w, x)?);
        strat.observe(x)?;
    }
    Ok(out)
}

fn build_report(
    name: String,
    dataset_name: String,
    hindsight: bool,
    seed: u64,
    gross: Vec<f64>,
    market_gross: Vec<f64>,
    params_trace: Vec<Vec<f64>>,
    oracle_trace: Vec<OracleTraceRecord>,
    metrics: &MetricOptions,
    warmup: usize,
) -> Result<BacktestReport, BacktestError> {
    let trajectory = ReturnTrajectory::new(gross, metrics.periods_per_year)?;
    let market_trajectory = ReturnTrajectory::new(market_gross, metrics.periods_per_year)?;
    let wealth = trajectory.wealth_curve();

    let skip = if metrics.exclude_warmup {
        warmup.min(trajectory.len().saturating_sub(2))
    } else {
        0
    };
    let summary = if skip > 0 {
        let s = ReturnTrajectory::new(
            trajectory.gross_returns()[skip..].to_vec(),
            metrics.periods_per_year,
        )?;
        let m = ReturnTrajectory::new(
            market_trajectory.gross_returns()[skip..].to_vec(),
            metrics.periods_per_year,
        )?;
        summarize(&s, &m, metrics.risk_free_annual)?
    } else {
        summarize(&trajectory, &market_trajectory, metrics.risk_free_annual)?
    };

    Ok(BacktestReport {
        name,
        dataset_name,
        hindsight,
        seed,
        wealth,
        trajectory,
        market_trajectory,
        summary,
        params_trace,
        oracle_trace,
        warmup_excluded: skip,
    })
}

/// Rounds parameter entries the strategy consumes as integers.
fn concretize_params(kind: StrategyKind, theta: &[f64]) -> Vec<f64> {
    kind.param_specs()
        .iter()
        .zip(theta)
        .map(|(spec, &v)| if spec.integer { v.round() } else { v })
        .collect()
}

/// Runs a strategy with fixed parameters over the series.
pub fn run_static(
    series: &PriceRelativeSeries,
    kind: StrategyKind,
    params: &[f64],
    metrics: &MetricOptions,
    dataset_name: &str,
    seed: u64,
) -> Result<BacktestReport, BacktestError> {
    let specs = kind.param_specs();
    if specs.len() != params.len() {
        return Err(BacktestError::ParamShape {
            expected: specs.len(),
            got: params.len(),
        });
    }
    let concrete = concretize_params(kind, params);
    let mut strat: Box<dyn OnlineStrategy> = if kind.is_hindsight() {
        Box::new(FixedStrategy::new(benchmark_portfolio(kind, series)?))
    } else {
        make_strategy(kind, series.num_assets())?
    };

    let mut gross = Vec::with_capacity(series.num_days());
    for t in 0..series.num_days() {
        let w = strat.decide(&concrete)?;
        let x = series.row(t);
        gross.push(period_return(&w, x)?);
        strat.observe(x)?;
    }
    let market_gross = market_returns(series)?;
    build_report(
        kind.name().to_string(),
        dataset_name.to_string(),
        kind.is_hindsight(),
        seed,
        gross,
        market_gross,
        vec![concrete],
        Vec::new(),
        metrics,
        0,
    )
}

/// Runs a strategy retuned every period by the configuration oracle.
///
/// Per period: the oracle proposes parameters, the strategy commits its
/// portfolio under them, the market reveals returns, the realized gross
/// return is attributed to those parameters and pushed into the GP window.
pub fn run_oracle(
    series: &PriceRelativeSeries,
    kind: StrategyKind,
    bounds: Vec<(f64, f64)>,
    oracle_cfg: OracleConfig,
    metrics: &MetricOptions,
    dataset_name: &str,
) -> Result<BacktestReport, BacktestError> {
    let specs = kind.param_specs();
    if specs.len() != bounds.len() {
        return Err(BacktestError::ParamShape {
            expected: specs.len(),
            got: bounds.len(),
        });
    }
    let seed = oracle_cfg.seed;
    let n_init = oracle_cfg.n_init;
    let mut oracle = ConfigOracle::new(bounds, oracle_cfg)?;
    let mut strat = make_strategy(kind, series.num_assets())?;

    let mut gross = Vec::with_capacity(series.num_days());
    let mut params_trace = Vec::with_capacity(series.num_days());
    for t in 0..series.num_days() {
        let theta = oracle.next_params(t + 1)?;
        let concrete = concretize_params(kind, &theta);
        let w = strat.decide(&concrete)?;
        let x = series.row(t);
        let r = period_return(&w, x)?;
        strat.observe(x)?;
        oracle.observe(r)?;
        gross.push(r);
        params_trace.push(concrete);
    }
    let market_gross = market_returns(series)?;
    build_report(
        format!("{}-O", kind.name()),
        dataset_name.to_string(),
        false,
        seed,
        gross,
        market_gross,
        params_trace,
        oracle.trace().to_vec(),
        metrics,
        n_init,
    )
}

/// Materializes the dataset named by a config (CSV or bundled synthetic).
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<PriceRelativeSeries, BacktestError> {
    Ok(match &cfg.dataset {
        DatasetSpec::Csv(path) => PriceRelativeSeries::load_csv(path)?,
        DatasetSpec::RegimeSwitch => synthetic::regime_switch_market(cfg.seed),
        DatasetSpec::Momentum { assets, days } => {
            synthetic::drifting_momentum_market(*assets, *days, cfg.seed)
        }
    })
}

/// Config-driven entry point used by the CLI.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BacktestReport, BacktestError> {
    let series = load_dataset(cfg)?;
    if cfg.oracle_enabled {
        run_oracle(
            &series,
            cfg.strategy,
            cfg.effective_bounds(),
            cfg.oracle.clone(),
            &cfg.metrics,
            &cfg.dataset_name,
        )
    } else {
        run_static(
            &series,
            cfg.strategy,
            &cfg.effective_params(),
            &cfg.metrics,
            &cfg.dataset_name,
            cfg.seed,
        )
    }
}
