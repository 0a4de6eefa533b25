//! The adaptive configuration oracle: per trading period, refit the GP
//! surrogate on the observation window, maximize the UCB acquisition over
//! the parameter box with the swarm optimizer, and emit the parameters for
//! the period. Realized returns feed back into the moving window.
//!
//! The first `n_init` periods replay a latin hypercube design without
//! consulting the GP. Evaluation times are known (one per trading period),
//! so the feasible region fixes the temporal coordinate to the period being
//! decided and the acquisition is searched over parameters only.

pub mod lhs;
pub mod pso;

pub use lhs::lhs_design;
pub use pso::{pso_maximize, PsoConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::gp::{
    fit::fit_model, FitConfig, GpDataset, GpError, GpModel, HyperPriors, InputNormalizer,
    KernelHyperparams, LengthscaleDiagnostic,
};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    BadConfig(String),
    #[error("next_params called twice without an observation for period {0}")]
    MissingObservation(usize),
    #[error("observe called with no pending step")]
    NoPendingStep,
    #[error("period {got} expected at least {needed} observations in the window")]
    NotEnoughData { needed: usize, got: usize },
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Everything that controls one oracle run. The GP refit cadence follows the
/// training cost: full MAP refit every period while the window holds fewer
/// than 100 rows, then every `refit_every` periods with posterior-only
/// updates in between (`always_refit` disables the thinning).
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub kappa: f64,
    pub window_capacity: usize,
    pub n_init: usize,
    pub pso: PsoConfig,
    pub seed: u64,
    pub priors: HyperPriors,
    pub map_restarts: usize,
    pub refit_restarts: usize,
    pub refit_every: usize,
    pub always_refit: bool,
    pub split_temporal: bool,
    pub ratio_threshold: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            window_capacity: 300,
            n_init: 10,
            pso: PsoConfig::default(),
            seed: 0,
            priors: HyperPriors::default(),
            map_restarts: 5,
            refit_restarts: 2,
            refit_every: 5,
            always_refit: false,
            split_temporal: false,
            ratio_threshold: 1.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.n_init < 1 {
            return Err(OracleError::BadConfig("n_init must be >= 1".into()));
        }
        if self.window_capacity < self.n_init {
            return Err(OracleError::BadConfig(format!(
                "window_capacity {} < n_init {}",
                self.window_capacity, self.n_init
            )));
        }
        if self.kappa < 0.0 || !self.kappa.is_finite() {
            return Err(OracleError::BadConfig("kappa must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Box constraints for one acquisition search: parameter bounds plus the
/// fixed (known) evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    pub param_bounds: Vec<(f64, f64)>,
    pub time_point: f64,
}

/// Per-period record of what the oracle chose and what happened.
#[derive(Debug, Clone)]
pub struct OracleTraceRecord {
    pub t: usize,
    pub theta: Vec<f64>,
    /// Acquisition value at the chosen point; absent during warm-up and
    /// fallback periods.
    pub acquisition: Option<f64>,
    pub realized_return: f64,
    /// Fitted temporal lengthscale rescaled to trading periods.
    pub temporal_lengthscale: Option<f64>,
    pub hyperparams: Option<KernelHyperparams>,
    pub fallback: bool,
}

/// Upper confidence bound in log-metric space.
pub fn ucb(model: &GpModel, theta: &[f64], t: f64, kappa: f64) -> Result<f64, GpError> {
    let (mean, var) = model.predict(theta, t)?;
    Ok(mean + kappa * var.sqrt())
}

struct PendingStep {
    t: usize,
    theta: Vec<f64>,
    acquisition: Option<f64>,
    fallback: bool,
}

/// One oracle instance drives one backtest, stepped sequentially:
/// [`ConfigOracle::next_params`] then [`ConfigOracle::observe`] once per
/// period. Swarm evaluations within a step run against the immutable fitted
/// posterior and may execute in parallel.
pub struct ConfigOracle {
    bounds: Vec<(f64, f64)>,
    cfg: OracleConfig,
    rng: ChaCha20Rng,
    warmup: Vec<Vec<f64>>,
    window: GpDataset,
    model: Option<GpModel>,
    warm_hyper: Option<KernelHyperparams>,
    last_fit_t: usize,
    best_seen: Option<(Vec<f64>, f64)>,
    pending: Option<PendingStep>,
    trace: Vec<OracleTraceRecord>,
}

impl ConfigOracle {
    pub fn new(bounds: Vec<(f64, f64)>, cfg: OracleConfig) -> Result<Self, OracleError> {
        cfg.validate()?;
        if bounds.is_empty() {
            return Err(OracleError::BadConfig("empty parameter bounds".into()));
        }
        for &(lo, hi) in &bounds {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(OracleError::BadConfig(format!(
                    "bad bound [{lo}, {hi}]: need finite lo < hi"
                )));
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let warmup = lhs_design(&bounds, cfg.n_init, &mut rng);
        let window = GpDataset::new(cfg.window_capacity);
        Ok(Self {
            bounds,
            cfg,
            rng,
            warmup,
            window,
            model: None,
            warm_hyper: None,
            last_fit_t: 0,
            best_seen: None,
            pending: None,
            trace: Vec::new(),
        })
    }

    pub fn trace(&self) -> &[OracleTraceRecord] {
        &self.trace
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn window(&self) -> &GpDataset {
        &self.window
    }

    pub fn feasible_region(&self, t: usize) -> FeasibleRegion {
        FeasibleRegion {
            param_bounds: self.bounds.clone(),
            time_point: t as f64,
        }
    }

    /// Fitted-model diagnostic against a trading horizon; `None` before the
    /// first successful fit.
    pub fn lengthscale_diagnostic(&self, horizon: usize) -> Option<LengthscaleDiagnostic> {
        self.model.as_ref().map(|m| {
            crate::gp::temporal_lengthscale_diagnostic(
                m.temporal_lengthscale_periods(),
                horizon,
                self.cfg.ratio_threshold,
            )
        })
    }

    /// Parameters for trading period `t` (1-based). Warm-up periods replay
    /// the latin hypercube design; afterwards the GP is refit on the window
    /// and the UCB acquisition is maximized over the box at the known
    /// evaluation time. A failed fit falls back to the best parameters seen
    /// so far (recorded in the trace, not fatal).
    pub fn next_params(&mut self, t: usize) -> Result<Vec<f64>, OracleError> {
        if let Some(p) = &self.pending {
            return Err(OracleError::MissingObservation(p.t));
        }
        if t <= self.cfg.n_init {
            let theta = self.warmup[t - 1].clone();
            self.pending = Some(PendingStep {
                t,
                theta: theta.clone(),
                acquisition: None,
                fallback: false,
            });
            return Ok(theta);
        }
        if self.window.len() < self.cfg.n_init {
            return Err(OracleError::NotEnoughData {
                needed: self.cfg.n_init,
                got: self.window.len(),
            });
        }

        self.refresh_model(t);
        let (theta, acquisition, fallback) = match &self.model {
            Some(model) => {
                let kappa = self.cfg.kappa;
                let time_point = self.feasible_region(t).time_point;
                let objective = |theta: &[f64]| {
                    ucb(model, theta, time_point, kappa).unwrap_or(f64::NEG_INFINITY)
                };
                let mut theta = pso_maximize(objective, &self.bounds, &self.cfg.pso, &mut self.rng);
                for (v, &(lo, hi)) in theta.iter_mut().zip(&self.bounds) {
                    *v = v.clamp(lo, hi);
                }
                let acq = ucb(model, &theta, time_point, kappa).ok();
                (theta, acq, false)
            }
            None => {
                let theta = match &self.best_seen {
                    Some((theta, _)) => theta.clone(),
                    None => self
                        .bounds
                        .iter()
                        .map(|&(lo, hi)| 0.5 * (lo + hi))
                        .collect(),
                };
                (theta, None, true)
            }
        };
        self.pending = Some(PendingStep {
            t,
            theta: theta.clone(),
            acquisition,
            fallback,
        });
        Ok(theta)
    }

    /// Feeds back the gross return realized by the pending parameters,
    /// appending to the moving window (FIFO eviction at capacity) and the
    /// trace.
    pub fn observe(&mut self, gross_return: f64) -> Result<(), OracleError> {
        let pending = self.pending.take().ok_or(OracleError::NoPendingStep)?;
        self.window
            .push_return(pending.theta.clone(), pending.t as f64, gross_return)?;
        if self
            .best_seen
            .as_ref()
            .is_none_or(|(_, best)| gross_return > *best)
        {
            self.best_seen = Some((pending.theta.clone(), gross_return));
        }
        self.trace.push(OracleTraceRecord {
            t: pending.t,
            theta: pending.theta,
            acquisition: pending.acquisition,
            realized_return: gross_return,
            temporal_lengthscale: self
                .model
                .as_ref()
                .map(|m| m.temporal_lengthscale_periods()),
            hyperparams: self.model.as_ref().map(|m| m.hyperparams().clone()),
            fallback: pending.fallback,
        });
        Ok(())
    }

    fn normalizer(&self) -> InputNormalizer {
        let (t_lo, t_hi) = self.window.time_span().unwrap_or((0.0, 1.0));
        InputNormalizer::from_bounds(&self.bounds, t_lo, t_hi)
    }

    /// Full MAP refit every period while the window is small, thinned to
    /// every `refit_every` periods afterwards; in between, the posterior is
    /// rebuilt with the warm hyperparameters so new observations still enter.
    fn refresh_model(&mut self, t: usize) {
        let n = self.window.len();
        let due = self.model.is_none()
            || self.cfg.always_refit
            || n < 100
            || t.saturating_sub(self.last_fit_t) >= self.cfg.refit_every.max(1);
        let norm = self.normalizer();
        if due {
            let init = self.warm_hyper.clone().unwrap_or_else(|| {
                let mut h = KernelHyperparams::unit(self.bounds.len());
                h.temporal_l_split = self.cfg.split_temporal.then_some(1.0);
                h
            });
            let restarts = if self.warm_hyper.is_none() {
                self.cfg.map_restarts
            } else {
                self.cfg.refit_restarts
            };
            let fit_cfg = FitConfig {
                restarts: restarts.max(1),
                ..FitConfig::default()
            };
            match fit_model(
                &self.window,
                norm,
                &init,
                &self.cfg.priors,
                &fit_cfg,
                &mut self.rng,
            ) {
                Ok((model, _)) => {
                    self.warm_hyper = Some(model.hyperparams().clone());
                    self.model = Some(model);
                    self.last_fit_t = t;
                    return;
                }
                Err(_) => {
                    // Fall through to a posterior-only rebuild below.
                }
            }
        }
        let rebuilt = self.warm_hyper.clone().and_then(|h| {
            GpModel::with_hyperparams(&self.window, self.normalizer(), h).ok()
        });
        // A rebuild failure leaves no model; the step falls back to the best
        // parameters seen so far.
        self.model = rebuilt;
    }
}
