//! MAP hyperparameter estimation: Gaussian log marginal likelihood plus
//! hyper-prior log densities, maximized by gradient ascent with an adaptive
//! step from several random restarts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use statrs::function::gamma::ln_gamma;

use super::{
    build_gram, cholesky_with_jitter, kernel, solve_cholesky_in_place, GpError, GpModel,
    KernelHyperparams,
};

/// Hyper-prior constants: log-normal on the parameter-space kernel
/// hyperparameters and the observation noise, Gamma on the temporal ones.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPriors {
    pub lognormal_mu: f64,
    pub lognormal_sigma: f64,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        Self {
            lognormal_mu: 0.0,
            lognormal_sigma: 1.0,
            gamma_shape: 2.0,
            gamma_scale: 1.0,
        }
    }
}

impl HyperPriors {
    /// Log density and its derivative w.r.t. `eta = ln h` for a log-normal
    /// hyper-prior.
    fn lognormal_logp(&self, eta: f64) -> (f64, f64) {
        let s2 = self.lognormal_sigma * self.lognormal_sigma;
        let z = eta - self.lognormal_mu;
        let logp = -eta
            - 0.5 * (2.0 * std::f64::consts::PI * s2).ln()
            - z * z / (2.0 * s2);
        (logp, -1.0 - z / s2)
    }

    /// Log density and derivative w.r.t. `eta = ln h` for a Gamma
    /// hyper-prior on `h = exp(eta)`.
    fn gamma_logp(&self, eta: f64) -> (f64, f64) {
        let k = self.gamma_shape;
        let theta = self.gamma_scale;
        let h = eta.exp();
        let logp = (k - 1.0) * eta - h / theta - ln_gamma(k) - k * theta.ln();
        (logp, (k - 1.0) - h / theta)
    }

    /// Which prior applies to each packed log-hyperparameter: temporal
    /// entries get the Gamma prior, the rest log-normal.
    fn logp_and_grad(&self, log_h: &[f64], d: usize, split: bool) -> (f64, Vec<f64>) {
        let n_temporal = 2 + usize::from(split);
        let temporal_start = 1 + 2 * d;
        let mut total = 0.0;
        let mut grad = vec![0.0; log_h.len()];
        for (j, &eta) in log_h.iter().enumerate() {
            let temporal = (temporal_start..temporal_start + n_temporal).contains(&j);
            let (lp, g) = if temporal {
                self.gamma_logp(eta)
            } else {
                self.lognormal_logp(eta)
            };
            total += lp;
            grad[j] = g;
        }
        (total, grad)
    }

    /// Draws a random restart point in log space.
    fn sample_log<R: Rng>(&self, d: usize, split: bool, rng: &mut R) -> Vec<f64> {
        let ln_dist = LogNormal::new(self.lognormal_mu, self.lognormal_sigma).expect("valid");
        let gamma_dist = Gamma::new(self.gamma_shape, self.gamma_scale).expect("valid");
        let n_log = 2 * d + 4 + usize::from(split);
        let temporal_start = 1 + 2 * d;
        let n_temporal = 2 + usize::from(split);
        (0..n_log)
            .map(|j| {
                let v: f64 = if (temporal_start..temporal_start + n_temporal).contains(&j) {
                    gamma_dist.sample(rng)
                } else {
                    ln_dist.sample(rng)
                };
                v.clamp(1e-4, 1e4).ln()
            })
            .collect()
    }
}

/// MAP objective value (log marginal likelihood plus log hyper-priors) and
/// its gradient with respect to the log-hyperparameters.
///
/// Inputs are assumed already normalized; `x_theta` rows pair with `x_time`.
pub fn log_evidence(
    x_theta: &[Vec<f64>],
    x_time: &[f64],
    y: &DVector<f64>,
    hyper: &KernelHyperparams,
    priors: &HyperPriors,
) -> Result<(f64, Vec<f64>), GpError> {
    hyper.validate()?;
    let n = x_time.len();
    if n == 0 {
        return Err(GpError::EmptyDataset);
    }
    let d = hyper.dim();
    let split = hyper.split_temporal();
    let n_hyper = hyper.log_dim();

    let gram = build_gram(x_theta, x_time, hyper)?;
    let (chol_l, _jitter) = cholesky_with_jitter(&gram, hyper.noise_sigma)?;
    let mut alpha = y.clone();
    solve_cholesky_in_place(&chol_l, &mut alpha);

    let log_det: f64 = chol_l.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * y.dot(&alpha)
        - 0.5 * log_det
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // M = alpha alpha' - K^{-1}; gradient_j = 1/2 tr(M dK/d eta_j).
    let k_inv = {
        let mut inv = DMatrix::identity(n, n);
        chol_l
            .solve_lower_triangular_mut(&mut inv)
            .then_some(())
            .expect("lower solve");
        chol_l
            .transpose()
            .solve_upper_triangular_mut(&mut inv)
            .then_some(())
            .expect("upper solve");
        inv
    };

    let mut grad = vec![0.0; n_hyper];
    let mut pair_grad = vec![0.0; n_hyper - 1];
    let mut trace_m = 0.0;
    for r in 0..n {
        for c in 0..=r {
            let m_rc = alpha[r] * alpha[c] - k_inv[(r, c)];
            let weight = if r == c { 0.5 } else { 1.0 };
            kernel::eval_with_grad(
                &x_theta[r],
                x_time[r],
                &x_theta[c],
                x_time[c],
                hyper,
                &mut pair_grad,
            );
            for (g, pg) in grad.iter_mut().zip(&pair_grad) {
                *g += weight * m_rc * pg;
            }
            if r == c {
                trace_m += m_rc;
            }
        }
    }
    // Observation noise: dK/d ln sigma_n = 2 sigma_n^2 I.
    grad[n_hyper - 1] = trace_m * hyper.noise_sigma * hyper.noise_sigma;

    let log_h = hyper.to_log_vector();
    let (prior_logp, prior_grad) = priors.logp_and_grad(&log_h, d, split);
    for (g, pg) in grad.iter_mut().zip(&prior_grad) {
        *g += pg;
    }
    Ok((lml + prior_logp, grad))
}

/// Controls for the MAP search.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 60,
            grad_tol: 1e-5,
        }
    }
}

const LOG_BOUND: f64 = 12.0;

/// Maximizes the MAP objective from `init` plus `restarts - 1` random
/// starts, keeping the best local optimum. Line-search stagnation returns
/// the best iterate rather than erroring.
pub fn fit_map<R: Rng>(
    x_theta: &[Vec<f64>],
    x_time: &[f64],
    y: &DVector<f64>,
    init: &KernelHyperparams,
    priors: &HyperPriors,
    cfg: &FitConfig,
    rng: &mut R,
) -> Result<(KernelHyperparams, f64), GpError> {
    if x_time.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    let d = init.dim();
    let split = init.split_temporal();

    let mut starts = vec![init.to_log_vector()];
    for _ in 1..cfg.restarts.max(1) {
        starts.push(priors.sample_log(d, split, rng));
    }

    // Random starts were drawn sequentially above; the ascents over the
    // candidates are independent and run in parallel deterministically.
    let results = crate::par::map_slice(&starts, |start| {
        ascend(x_theta, x_time, y, start, d, split, priors, cfg)
    });

    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bv, _)| r.0 > *bv) {
            best = Some(r);
        }
    }
    let (value, log_h) = best.ok_or(GpError::IllConditioned { max_jitter: 1e-6 })?;
    Ok((KernelHyperparams::from_log_vector(&log_h, d, split), value))
}

/// Convenience wrapper: run the MAP fit on a dataset and return the
/// resulting posterior model.
pub fn fit_model<R: Rng>(
    dataset: &super::GpDataset,
    norm: super::InputNormalizer,
    init: &KernelHyperparams,
    priors: &HyperPriors,
    cfg: &FitConfig,
    rng: &mut R,
) -> Result<(GpModel, f64), GpError> {
    let x_theta: Vec<Vec<f64>> = dataset.rows().map(|o| norm.theta(&o.theta)).collect();
    let x_time: Vec<f64> = dataset.rows().map(|o| norm.time(o.t)).collect();
    let y = DVector::from_iterator(dataset.len(), dataset.rows().map(|o| o.log_metric));
    let (hyper, value) = fit_map(&x_theta, &x_time, &y, init, priors, cfg, rng)?;
    let model = GpModel::with_hyperparams(dataset, norm, hyper)?;
    Ok((model, value))
}

/// Gradient ascent with a multiplicatively adapted step size.
#[allow(clippy::too_many_arguments)]
fn ascend(
    x_theta: &[Vec<f64>],
    x_time: &[f64],
    y: &DVector<f64>,
    start: &[f64],
    d: usize,
    split: bool,
    priors: &HyperPriors,
    cfg: &FitConfig,
) -> Option<(f64, Vec<f64>)> {
    let eval = |log_h: &[f64]| -> Option<(f64, Vec<f64>)> {
        let h = KernelHyperparams::from_log_vector(log_h, d, split);
        log_evidence(x_theta, x_time, y, &h, priors).ok()
    };

    let mut log_h: Vec<f64> = start.iter().map(|v| v.clamp(-LOG_BOUND, LOG_BOUND)).collect();
    let (mut value, mut grad) = eval(&log_h)?;
    let mut step = 0.1;
    for _ in 0..cfg.max_iters {
        let gnorm = grad.iter().map(|g| g.abs()).fold(0.0f64, f64::max);
        if gnorm < cfg.grad_tol {
            break;
        }
        let mut improved = false;
        for _ in 0..25 {
            let trial: Vec<f64> = log_h
                .iter()
                .zip(&grad)
                .map(|(h, g)| (h + step * g).clamp(-LOG_BOUND, LOG_BOUND))
                .collect();
            match eval(&trial) {
                Some((tv, tg)) if tv > value => {
                    log_h = trial;
                    value = tv;
                    grad = tg;
                    step = (step * 1.5).min(1.0);
                    improved = true;
                    break;
                }
                _ => step *= 0.5,
            }
            if step < 1e-12 {
                break;
            }
        }
        if !improved {
            break; // stagnation: best iterate so far is the answer
        }
    }
    Some((value, log_h))
}
