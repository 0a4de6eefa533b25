//! Online portfolio selection (OLPS) backtesting with an adaptive
//! parameter-configuration oracle.
//!
//! The crate has three layers:
//!
//! * market data and trading strategies ([`market`], [`strategies`]) — eight
//!   classic OLPS rules behind a uniform per-period update interface;
//! * a spatiotemporal Gaussian-process surrogate and the Bayesian-optimization
//!   oracle that retunes strategy parameters every trading period
//!   ([`gp`], [`oracle`]);
//! * backtest orchestration, performance measures and CSV reporting
//!   ([`backtest`], [`metrics`], [`report`]).
//!
//! Data-parallel inner loops (swarm evaluation, Gram assembly, seed batches)
//! run on rayon when the default `parallel` feature is enabled and fall back
//! to sequential iteration otherwise; results are identical either way.

pub mod backtest;
pub mod config;
pub mod gp;
pub mod market;
pub mod metrics;
pub mod oracle;
pub mod par;
pub mod report;
pub mod simplex;
pub mod strategies;
pub mod synthetic;

pub use backtest::{run_oracle, run_static, BacktestReport};
pub use config::ExperimentConfig;
pub use market::PriceRelativeSeries;
pub use metrics::{PerformanceSummary, ReturnTrajectory};
pub use oracle::{ConfigOracle, OracleConfig};
pub use strategies::Portfolio;
