//! Experiment configuration: a flat `key = value` text format so runs are
//! reproducible and diffable. Unknown keys are rejected.
//!
//! ```text
//! # PAMR tuned by the oracle on the bundled regime-switch market
//! dataset = synthetic:regime_switch
//! strategy = pamr
//! oracle = true
//! bounds = 0.1:1.2
//! seed = 7
//! outdir = out/pamr-oracle
//! ```

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::gp::HyperPriors;
use crate::oracle::{OracleConfig, PsoConfig};
use crate::strategies::StrategyKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {detail}")]
    BadValue { key: String, detail: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("oracle runs need parameter bounds; strategy '{0}' has none")]
    BoundsRequired(String),
    #[error(transparent)]
    Strategy(#[from] crate::strategies::StrategyError),
}

/// Where the price relatives come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Csv(PathBuf),
    RegimeSwitch,
    Momentum { assets: usize, days: usize },
}

impl DatasetSpec {
    fn parse(value: &str) -> Result<Self, ConfigError> {
        if let Some(rest) = value.strip_prefix("synthetic:") {
            let mut parts = rest.split(':');
            let kind = parts.next().unwrap_or_default();
            match kind {
                "regime_switch" => Ok(Self::RegimeSwitch),
                "momentum" => {
                    let mut assets = 5usize;
                    let mut days = 400usize;
                    if let Some(args) = parts.next() {
                        for kv in args.split(',') {
                            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::BadValue {
                                key: "dataset".into(),
                                detail: format!("expected k=v in '{kv}'"),
                            })?;
                            let parsed: usize = v.parse().map_err(|_| ConfigError::BadValue {
                                key: "dataset".into(),
                                detail: format!("'{v}' is not a count"),
                            })?;
                            match k {
                                "assets" => assets = parsed,
                                "days" => days = parsed,
                                other => {
                                    return Err(ConfigError::BadValue {
                                        key: "dataset".into(),
                                        detail: format!("unknown momentum arg '{other}'"),
                                    })
                                }
                            }
                        }
                    }
                    Ok(Self::Momentum { assets, days })
                }
                other => Err(ConfigError::BadValue {
                    key: "dataset".into(),
                    detail: format!("unknown synthetic dataset '{other}'"),
                }),
            }
        } else {
            Ok(Self::Csv(PathBuf::from(value)))
        }
    }
}

/// Metric conventions shared by all runs of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricOptions {
    pub periods_per_year: usize,
    pub risk_free_annual: f64,
    /// Drop the LHS warm-up periods from the summary measures (sensitivity
    /// runs); the wealth curve always covers the full horizon.
    pub exclude_warmup: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            periods_per_year: 252,
            risk_free_annual: 0.0,
            exclude_warmup: false,
        }
    }
}

/// One experiment: a dataset, a strategy, optional oracle tuning, metric
/// options and the output location.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub dataset_name: String,
    pub strategy: StrategyKind,
    /// Static parameters; strategy defaults when absent.
    pub params: Option<Vec<f64>>,
    pub oracle_enabled: bool,
    /// Oracle search box; strategy defaults when absent.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub oracle: OracleConfig,
    pub metrics: MetricOptions,
    pub outdir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self, ConfigError> {
        let mut dataset = None;
        let mut dataset_name = None;
        let mut strategy = None;
        let mut params = None;
        let mut oracle_enabled = false;
        let mut bounds = None;
        let mut oracle = OracleConfig::default();
        let mut pso = PsoConfig::default();
        let mut priors = HyperPriors::default();
        let mut metrics = MetricOptions::default();
        let mut outdir = PathBuf::from("out");
        let mut seed = 0u64;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: lineno + 1,
                text: line.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |detail: String| ConfigError::BadValue {
                key: key.to_string(),
                detail,
            };
            let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
            let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
            let parse_bool = |v: &str| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(bad(format!("'{other}' is not a bool"))),
            };
            match key {
                "dataset" => dataset = Some(DatasetSpec::parse(value)?),
                "dataset_name" => dataset_name = Some(value.to_string()),
                "strategy" => strategy = Some(StrategyKind::parse(value)?),
                "params" => {
                    let values: Result<Vec<f64>, _> =
                        value.split(',').map(|v| parse_f64(v.trim())).collect();
                    params = Some(values?);
                }
                "oracle" => oracle_enabled = parse_bool(value)?,
                "bounds" => {
                    let parsed: Result<Vec<(f64, f64)>, ConfigError> = value
                        .split(',')
                        .map(|pair| {
                            let (lo, hi) = pair.trim().split_once(':').ok_or_else(|| {
                                bad(format!("expected lo:hi in '{pair}'"))
                            })?;
                            Ok((parse_f64(lo.trim())?, parse_f64(hi.trim())?))
                        })
                        .collect();
                    bounds = Some(parsed?);
                }
                "seed" => seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "outdir" => outdir = PathBuf::from(value),
                "periods_per_year" => metrics.periods_per_year = parse_usize(value)?,
                "risk_free" => metrics.risk_free_annual = parse_f64(value)?,
                "exclude_warmup" => metrics.exclude_warmup = parse_bool(value)?,
                "kappa" => oracle.kappa = parse_f64(value)?,
                "window_capacity" => oracle.window_capacity = parse_usize(value)?,
                "n_init" => oracle.n_init = parse_usize(value)?,
                "pso_particles" => pso.particles = parse_usize(value)?,
                "pso_iterations" => pso.iterations = parse_usize(value)?,
                "pso_inertia" => pso.inertia = parse_f64(value)?,
                "pso_cognitive" => pso.cognitive = parse_f64(value)?,
                "pso_social" => pso.social = parse_f64(value)?,
                "map_restarts" => oracle.map_restarts = parse_usize(value)?,
                "refit_restarts" => oracle.refit_restarts = parse_usize(value)?,
                "refit_every" => oracle.refit_every = parse_usize(value)?,
                "always_refit" => oracle.always_refit = parse_bool(value)?,
                "split_temporal" => oracle.split_temporal = parse_bool(value)?,
                "ratio_threshold" => oracle.ratio_threshold = parse_f64(value)?,
                "lognormal_mu" => priors.lognormal_mu = parse_f64(value)?,
                "lognormal_sigma" => priors.lognormal_sigma = parse_f64(value)?,
                "gamma_shape" => priors.gamma_shape = parse_f64(value)?,
                "gamma_scale" => priors.gamma_scale = parse_f64(value)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }

        let dataset = dataset.ok_or(ConfigError::Missing("dataset"))?;
        let strategy = strategy.ok_or(ConfigError::Missing("strategy"))?;
        oracle.pso = pso;
        oracle.priors = priors;
        oracle.seed = seed;

        let cfg = Self {
            dataset_name: dataset_name.unwrap_or_else(|| match &dataset {
                DatasetSpec::Csv(p) => p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into()),
                DatasetSpec::RegimeSwitch => "regime_switch".into(),
                DatasetSpec::Momentum { .. } => "momentum".into(),
            }),
            dataset,
            strategy,
            params,
            oracle_enabled,
            bounds,
            oracle,
            metrics,
            outdir,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let specs = self.strategy.param_specs();
        if self.oracle_enabled && specs.is_empty() {
            return Err(ConfigError::BoundsRequired(self.strategy.name().into()));
        }
        if let Some(b) = &self.bounds {
            if b.len() != specs.len() {
                return Err(ConfigError::BadValue {
                    key: "bounds".into(),
                    detail: format!("{} pairs for {} parameters", b.len(), specs.len()),
                });
            }
            for &(lo, hi) in b {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(ConfigError::BadValue {
                        key: "bounds".into(),
                        detail: format!("bad box [{lo}, {hi}]"),
                    });
                }
            }
        }
        if let Some(p) = &self.params {
            crate::strategies::StrategyParams::validated(p.clone(), &specs)?;
        }
        Ok(())
    }

    /// Search box for the oracle: explicit bounds or the strategy defaults.
    pub fn effective_bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.clone().unwrap_or_else(|| {
            self.strategy
                .param_specs()
                .iter()
                .map(|s| (s.lo, s.hi))
                .collect()
        })
    }

    /// Static parameter vector: explicit values or published defaults.
    pub fn effective_params(&self) -> Vec<f64> {
        self.params
            .clone()
            .unwrap_or_else(|| self.strategy.default_params().values)
    }

    /// Run label, `-O` suffix marking oracle-tuned variants.
    pub fn run_name(&self) -> String {
        if self.oracle_enabled {
            format!("{}-O", self.strategy.name())
        } else {
            self.strategy.name().to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "dataset = synthetic:regime_switch\nstrategy = pamr\n";

    #[test]
    fn minimal_config_round_trips_defaults() {
        let cfg = ExperimentConfig::from_str_contents(MINIMAL).unwrap();
        assert_eq!(cfg.dataset, DatasetSpec::RegimeSwitch);
        assert_eq!(cfg.strategy, StrategyKind::Pamr);
        assert!(!cfg.oracle_enabled);
        assert_eq!(cfg.effective_params(), vec![0.5]);
        assert_eq!(cfg.effective_bounds(), vec![(0.0, 1.2)]);
        assert_eq!(cfg.metrics.periods_per_year, 252);
        assert_eq!(cfg.run_name(), "pamr");
    }

    #[test]
    fn full_config_parses() {
        let text = "\
# comment
dataset = synthetic:momentum:assets=4,days=120
strategy = olmar
params = 8.0, 6
oracle = true
bounds = 1.5:15, 3:20
seed = 99
kappa = 1.5
window_capacity = 120
n_init = 8
pso_particles = 16
pso_iterations = 25
exclude_warmup = true
outdir = /tmp/x
";
        let cfg = ExperimentConfig::from_str_contents(text).unwrap();
        assert_eq!(
            cfg.dataset,
            DatasetSpec::Momentum {
                assets: 4,
                days: 120
            }
        );
        assert!(cfg.oracle_enabled);
        assert_eq!(cfg.bounds.as_ref().unwrap().len(), 2);
        assert_eq!(cfg.oracle.seed, 99);
        assert_eq!(cfg.oracle.pso.particles, 16);
        assert!(cfg.metrics.exclude_warmup);
        assert_eq!(cfg.run_name(), "olmar-O");
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_str_contents("strategy = pamr\n"),
            Err(ConfigError::Missing("dataset"))
        ));
        assert!(matches!(
            ExperimentConfig::from_str_contents(&format!("{MINIMAL}nonsense_key = 1\n")),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_str_contents(&format!("{MINIMAL}bounds = 0.5:0.1\n")),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ExperimentConfig::from_str_contents(&format!("{MINIMAL}bounds = 0:1,0:1\n")),
            Err(ConfigError::BadValue { .. })
        ));
        // Oracle needs a tunable strategy.
        assert!(matches!(
            ExperimentConfig::from_str_contents(
                "dataset = synthetic:regime_switch\nstrategy = market\noracle = true\n"
            ),
            Err(ConfigError::BoundsRequired(_))
        ));
        // Static params outside the declared box.
        assert!(ExperimentConfig::from_str_contents(&format!("{MINIMAL}params = 9.0\n")).is_err());
    }
}
