//! Portfolio selection rules behind a uniform per-period interface.
//!
//! Eight strategies: three benchmarks (uniform buy-and-hold market, best
//! stock, best constant rebalanced portfolio), two momentum rules
//! (exponential gradient, online Newton step) and three mean-reversion rules
//! (PAMR, CWMR, OLMAR). Causal strategies expose a two-phase step:
//! [`OnlineStrategy::decide`] commits the portfolio for the upcoming period
//! using data revealed so far, then [`OnlineStrategy::observe`] absorbs the
//! revealed returns.

mod benchmarks;
mod cwmr;
mod eg;
mod olmar;
mod ons;
mod pamr;

pub use benchmarks::{bcrp, best_stock, drift_update, MarketStrategy};
pub use cwmr::{cwmr_update, CwmrStrategy};
pub use eg::{eg_update, EgStrategy};
pub use olmar::{moving_average_prediction, olmar_update, OlmarStrategy};
pub use ons::{ons_newton_target, OnsStrategy};
pub use pamr::{pamr_update, PamrStrategy};

use thiserror::Error;

use crate::market::PriceRelativeSeries;

/// Direction vectors shorter than this are treated as degenerate and the
/// corresponding update becomes a no-op (flat-market guard).
pub const DIRECTION_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("portfolio/return dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("empty price series")]
    EmptySeries,
    #[error("invalid parameter {name}={value}: {detail}")]
    InvalidParam {
        name: String,
        value: f64,
        detail: String,
    },
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("optimizer failed to converge after {0} iterations")]
    NonConvergence(usize),
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error(transparent)]
    Simplex(#[from] crate::simplex::SimplexError),
}

/// Nonnegative weights summing to one: the fraction of wealth per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<f64>,
}

impl Portfolio {
    /// Uniform portfolio over `m` assets.
    pub fn uniform(m: usize) -> Self {
        Self {
            weights: vec![1.0 / m as f64; m],
        }
    }

    /// Unit weight on a single asset.
    pub fn vertex(m: usize, i: usize) -> Self {
        let mut weights = vec![0.0; m];
        weights[i] = 1.0;
        Self { weights }
    }

    /// Clamps negatives to zero and rescales to sum exactly one.
    pub(crate) fn normalized(mut weights: Vec<f64>) -> Self {
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 {
            for w in &mut weights {
                *w /= sum;
            }
        } else {
            let m = weights.len();
            weights = vec![1.0 / m as f64; m];
        }
        Self { weights }
    }

    /// Validates an externally supplied weight vector.
    pub fn new(weights: Vec<f64>) -> Result<Self, StrategyError> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
            return Err(StrategyError::InvalidParam {
                name: "weights".into(),
                value: sum,
                detail: "must be nonnegative and sum to 1".into(),
            });
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gross return of holding `w` through a period with relatives `x`.
pub fn period_return(w: &Portfolio, x: &[f64]) -> Result<f64, StrategyError> {
    if w.len() != x.len() {
        return Err(StrategyError::DimensionMismatch(w.len(), x.len()));
    }
    Ok(dot(w.weights(), x))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One tunable parameter: bounds, default and whether the strategy consumes
/// it as an integer (rounded before use).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub default: f64,
    pub integer: bool,
}

/// A concrete parameter vector checked against a strategy's [`ParamSpec`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    pub values: Vec<f64>,
}

impl StrategyParams {
    pub fn validated(values: Vec<f64>, specs: &[ParamSpec]) -> Result<Self, StrategyError> {
        if values.len() != specs.len() {
            return Err(StrategyError::ParamCount {
                expected: specs.len(),
                got: values.len(),
            });
        }
        for (v, s) in values.iter().zip(specs) {
            if !v.is_finite() || *v < s.lo || *v > s.hi {
                return Err(StrategyError::InvalidParam {
                    name: s.name.to_string(),
                    value: *v,
                    detail: format!("outside [{}, {}]", s.lo, s.hi),
                });
            }
        }
        Ok(Self { values })
    }
}

/// The strategy roster used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Market,
    BestStock,
    Bcrp,
    Eg,
    Ons,
    Pamr,
    Cwmr,
    Olmar,
}

impl StrategyKind {
    pub fn parse(name: &str) -> Result<Self, StrategyError> {
        match name.to_ascii_lowercase().as_str() {
            "market" => Ok(Self::Market),
            "bs" | "best_stock" | "beststock" => Ok(Self::BestStock),
            "bcrp" => Ok(Self::Bcrp),
            "eg" => Ok(Self::Eg),
            "ons" => Ok(Self::Ons),
            "pamr" => Ok(Self::Pamr),
            "cwmr" => Ok(Self::Cwmr),
            "olmar" => Ok(Self::Olmar),
            other => Err(StrategyError::UnknownStrategy(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Market => "market",
            Self::BestStock => "bs",
            Self::Bcrp => "bcrp",
            Self::Eg => "eg",
            Self::Ons => "ons",
            Self::Pamr => "pamr",
            Self::Cwmr => "cwmr",
            Self::Olmar => "olmar",
        }
    }

    /// Hindsight benchmarks see the full series and are not causally tradable.
    pub fn is_hindsight(&self) -> bool {
        matches!(self, Self::BestStock | Self::Bcrp)
    }

    /// Tunable parameters, their boxes and published defaults.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            Self::Market | Self::BestStock | Self::Bcrp => vec![],
            Self::Eg => vec![ParamSpec {
                name: "eta",
                lo: 0.0,
                hi: 0.3,
                default: 0.05,
                integer: false,
            }],
            Self::Ons => vec![
                ParamSpec {
                    name: "eta",
                    lo: 0.0,
                    hi: 0.3,
                    default: 0.0,
                    integer: false,
                },
                ParamSpec {
                    name: "beta",
                    lo: 0.1,
                    hi: 5.0,
                    default: 1.0,
                    integer: false,
                },
            ],
            Self::Pamr => vec![ParamSpec {
                name: "epsilon",
                lo: 0.0,
                hi: 1.2,
                default: 0.5,
                integer: false,
            }],
            Self::Cwmr => vec![ParamSpec {
                name: "phi",
                lo: 0.5,
                hi: 3.0,
                default: 2.0,
                integer: false,
            }],
            Self::Olmar => vec![
                ParamSpec {
                    name: "epsilon",
                    lo: 1.1,
                    hi: 20.0,
                    default: 10.0,
                    integer: false,
                },
                ParamSpec {
                    name: "window",
                    lo: 3.0,
                    hi: 30.0,
                    default: 5.0,
                    integer: true,
                },
            ],
        }
    }

    pub fn default_params(&self) -> StrategyParams {
        StrategyParams {
            values: self.param_specs().iter().map(|s| s.default).collect(),
        }
    }
}

/// Per-period interface shared by all causal strategies.
///
/// `decide` commits the portfolio for the coming period — applying the
/// strategy's update rule with the supplied parameters to everything
/// revealed so far — and `observe` feeds it the period's realized relatives.
/// State is single-owner; independent backtests run in parallel with
/// independent instances.
pub trait OnlineStrategy: Send {
    fn decide(&mut self, params: &[f64]) -> Result<Portfolio, StrategyError>;
    fn observe(&mut self, x: &[f64]) -> Result<(), StrategyError>;
}

/// Instantiates the causal strategy `kind` for an `m`-asset market.
///
/// Hindsight benchmarks (BS, BCRP) are not built here; the backtest layer
/// computes their fixed portfolios from the full series.
pub fn make_strategy(
    kind: StrategyKind,
    m: usize,
) -> Result<Box<dyn OnlineStrategy>, StrategyError> {
    match kind {
        StrategyKind::Market => Ok(Box::new(MarketStrategy::new(m))),
        StrategyKind::Eg => Ok(Box::new(EgStrategy::new(m))),
        StrategyKind::Ons => Ok(Box::new(OnsStrategy::new(m))),
        StrategyKind::Pamr => Ok(Box::new(PamrStrategy::new(m))),
        StrategyKind::Cwmr => Ok(Box::new(CwmrStrategy::new(m))),
        StrategyKind::Olmar => Ok(Box::new(OlmarStrategy::new(m))),
        StrategyKind::BestStock | StrategyKind::Bcrp => Err(StrategyError::UnknownStrategy(
            format!("{} is a hindsight benchmark, not a causal strategy", kind.name()),
        )),
    }
}

/// Fixed portfolio replayed every period (hindsight benchmarks and
/// constant-rebalanced runs).
pub struct FixedStrategy {
    portfolio: Portfolio,
}

impl FixedStrategy {
    pub fn new(portfolio: Portfolio) -> Self {
        Self { portfolio }
    }
}

impl OnlineStrategy for FixedStrategy {
    fn decide(&mut self, _params: &[f64]) -> Result<Portfolio, StrategyError> {
        Ok(self.portfolio.clone())
    }

    fn observe(&mut self, _x: &[f64]) -> Result<(), StrategyError> {
        Ok(())
    }
}

/// Hindsight target portfolio for a benchmark kind on a full series.
pub fn benchmark_portfolio(
    kind: StrategyKind,
    series: &PriceRelativeSeries,
) -> Result<Portfolio, StrategyError> {
    match kind {
        StrategyKind::BestStock => best_stock(series),
        StrategyKind::Bcrp => bcrp(series),
        other => Err(StrategyError::UnknownStrategy(format!(
            "{} is not a hindsight benchmark",
            other.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn period_return_cases() {
        let w = Portfolio::uniform(2);
        assert_relative_eq!(period_return(&w, &[1.0, 1.0]).unwrap(), 1.0);
        assert_relative_eq!(period_return(&w, &[1.2, 0.8]).unwrap(), 1.0);
        let v = Portfolio::vertex(2, 0);
        assert_relative_eq!(period_return(&v, &[1.1, 0.5]).unwrap(), 1.1);
        assert!(period_return(&v, &[1.0]).is_err());
    }

    #[test]
    fn param_validation() {
        let specs = StrategyKind::Olmar.param_specs();
        assert!(StrategyParams::validated(vec![10.0, 5.0], &specs).is_ok());
        assert!(StrategyParams::validated(vec![0.5, 5.0], &specs).is_err());
        assert!(StrategyParams::validated(vec![10.0], &specs).is_err());
    }

    #[test]
    fn roster_roundtrip() {
        for kind in [
            StrategyKind::Market,
            StrategyKind::BestStock,
            StrategyKind::Bcrp,
            StrategyKind::Eg,
            StrategyKind::Ons,
            StrategyKind::Pamr,
            StrategyKind::Cwmr,
            StrategyKind::Olmar,
        ] {
            assert_eq!(StrategyKind::parse(kind.name()).unwrap(), kind);
        }
        assert!(StrategyKind::parse("nope").is_err());
    }
}
