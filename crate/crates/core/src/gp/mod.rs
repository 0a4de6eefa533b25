//! Gaussian-process regression over (strategy parameters, trading period) ->
//! log gross return.
//!
//! The prior is a zero-mean GP with the separable spatiotemporal kernel of
//! [`kernel`]; hyperparameters are trained by MAP with log-normal
//! hyper-priors on the parameter-space quantities and the observation noise,
//! and Gamma hyper-priors on the temporal quantities. Inputs are affinely
//! rescaled to the unit box per dimension before kernel evaluation; the time
//! axis is rescaled by the training window's span.

pub mod fit;
pub mod kernel;

pub use fit::{fit_map, log_evidence, FitConfig, HyperPriors};
pub use kernel::{k_joint, k_param, k_temporal};

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hyperparameter {name} = {value} must be strictly positive and finite")]
    InvalidHyperparam { name: &'static str, value: f64 },
    #[error("kernel matrix factorization failed even with jitter up to {max_jitter:e}")]
    IllConditioned { max_jitter: f64 },
    #[error("empty dataset where observations are required")]
    EmptyDataset,
    #[error("observation times must be nondecreasing ({prev} then {next})")]
    TimeOrder { prev: f64, next: f64 },
    #[error("non-positive gross return {0} cannot enter the log-metric window")]
    NonPositiveMetric(f64),
}

/// Kernel hyperparameters: signal amplitude, per-parameter-dimension
/// rational-quadratic lengthscales and shapes, the temporal lengthscale(s)
/// and shape, and the observation noise standard deviation.
///
/// By default the exponential and rational-quadratic temporal terms share
/// one lengthscale (as printed in the defining formula); setting
/// `temporal_l_split` gives the exponential term its own.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelHyperparams {
    pub sigma_f: f64,
    pub lengthscales: Vec<f64>,
    pub alphas: Vec<f64>,
    pub temporal_l: f64,
    pub temporal_l_split: Option<f64>,
    pub temporal_alpha: f64,
    pub noise_sigma: f64,
}

impl KernelHyperparams {
    /// All-ones starting point for `d` parameter dimensions with small noise.
    pub fn unit(d: usize) -> Self {
        Self {
            sigma_f: 1.0,
            lengthscales: vec![1.0; d],
            alphas: vec![1.0; d],
            temporal_l: 1.0,
            temporal_l_split: None,
            temporal_alpha: 1.0,
            noise_sigma: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub(crate) fn split_temporal(&self) -> bool {
        self.temporal_l_split.is_some()
    }

    /// Lengthscale used by the exponential temporal term.
    pub fn temporal_l_exp(&self) -> f64 {
        self.temporal_l_split.unwrap_or(self.temporal_l)
    }

    /// Number of log-hyperparameters (the MAP search space).
    pub fn log_dim(&self) -> usize {
        // sigma_f, D lengthscales, D alphas, temporal l (+ split), alpha, noise.
        2 * self.dim() + 4 + usize::from(self.split_temporal())
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GpError::InvalidHyperparam { name, value: v })
            }
        };
        check("sigma_f", self.sigma_f)?;
        for &l in &self.lengthscales {
            check("lengthscale", l)?;
        }
        for &a in &self.alphas {
            check("alpha", a)?;
        }
        check("temporal_l", self.temporal_l)?;
        if let Some(l) = self.temporal_l_split {
            check("temporal_l_split", l)?;
        }
        check("temporal_alpha", self.temporal_alpha)?;
        check("noise_sigma", self.noise_sigma)
    }

    /// Packs into log space: `[ln sigma_f, ln l_1.., ln a_1.., ln l_T,
    /// (ln l_exp,) ln alpha_T, ln noise]`.
    pub fn to_log_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.log_dim());
        v.push(self.sigma_f.ln());
        v.extend(self.lengthscales.iter().map(|l| l.ln()));
        v.extend(self.alphas.iter().map(|a| a.ln()));
        v.push(self.temporal_l.ln());
        if let Some(l) = self.temporal_l_split {
            v.push(l.ln());
        }
        v.push(self.temporal_alpha.ln());
        v.push(self.noise_sigma.ln());
        v
    }

    pub fn from_log_vector(log_v: &[f64], d: usize, split: bool) -> Self {
        let mut it = log_v.iter().map(|v| v.exp());
        let sigma_f = it.next().unwrap();
        let lengthscales: Vec<f64> = (&mut it).take(d).collect();
        let alphas: Vec<f64> = (&mut it).take(d).collect();
        let temporal_l = it.next().unwrap();
        let temporal_l_split = if split { Some(it.next().unwrap()) } else { None };
        let temporal_alpha = it.next().unwrap();
        let noise_sigma = it.next().unwrap();
        Self {
            sigma_f,
            lengthscales,
            alphas,
            temporal_l,
            temporal_l_split,
            temporal_alpha,
            noise_sigma,
        }
    }
}

/// One training triple: parameters, trading period, log gross return.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub theta: Vec<f64>,
    pub t: f64,
    pub log_metric: f64,
}

/// FIFO training window of (theta, t, log-metric) triples with bounded
/// capacity and nondecreasing times.
#[derive(Debug, Clone)]
pub struct GpDataset {
    capacity: usize,
    rows: VecDeque<Observation>,
}

impl GpDataset {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            rows: VecDeque::new(),
        }
    }

    /// Appends a realized gross return, evicting the oldest row when full.
    pub fn push_return(&mut self, theta: Vec<f64>, t: f64, gross_return: f64) -> Result<(), GpError> {
        if !gross_return.is_finite() || gross_return <= 0.0 {
            return Err(GpError::NonPositiveMetric(gross_return));
        }
        if let Some(last) = self.rows.back() {
            if t < last.t {
                return Err(GpError::TimeOrder {
                    prev: last.t,
                    next: t,
                });
            }
        }
        self.rows.push_back(Observation {
            theta,
            t,
            log_metric: gross_return.ln(),
        });
        while self.rows.len() > self.capacity {
            self.rows.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn rows(&self) -> impl Iterator<Item = &Observation> {
        self.rows.iter()
    }

    pub fn time_span(&self) -> Option<(f64, f64)> {
        match (self.rows.front(), self.rows.back()) {
            (Some(a), Some(b)) => Some((a.t, b.t)),
            _ => None,
        }
    }
}

/// Affine rescaling of inputs to the unit box before kernel evaluation.
#[derive(Debug, Clone)]
pub struct InputNormalizer {
    lo: Vec<f64>,
    inv_span: Vec<f64>,
    t_lo: f64,
    t_inv_span: f64,
}

impl InputNormalizer {
    /// From parameter box bounds and the training window's time range.
    pub fn from_bounds(bounds: &[(f64, f64)], t_lo: f64, t_hi: f64) -> Self {
        let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let inv_span: Vec<f64> = bounds
            .iter()
            .map(|b| 1.0 / (b.1 - b.0).max(1e-9))
            .collect();
        Self {
            lo,
            inv_span,
            t_lo,
            t_inv_span: 1.0 / (t_hi - t_lo).max(1.0),
        }
    }

    /// No rescaling (kernel sees raw coordinates).
    pub fn identity(d: usize) -> Self {
        Self {
            lo: vec![0.0; d],
            inv_span: vec![1.0; d],
            t_lo: 0.0,
            t_inv_span: 1.0,
        }
    }

    pub fn theta(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.inv_span))
            .map(|(&v, (&lo, &inv))| (v - lo) * inv)
            .collect()
    }

    pub fn time(&self, t: f64) -> f64 {
        (t - self.t_lo) * self.t_inv_span
    }

    /// Raw time units per normalized unit (the window span).
    pub fn time_span(&self) -> f64 {
        1.0 / self.t_inv_span
    }
}

/// A fitted (or prior) posterior: hyperparameters plus the cached Cholesky
/// factorization of the training Gram matrix. Immutable; predictions may run
/// concurrently.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: KernelHyperparams,
    norm: InputNormalizer,
    x_theta: Vec<Vec<f64>>,
    x_time: Vec<f64>,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// Builds the posterior for fixed hyperparameters over the dataset.
    pub fn with_hyperparams(
        dataset: &GpDataset,
        norm: InputNormalizer,
        hyper: KernelHyperparams,
    ) -> Result<Self, GpError> {
        hyper.validate()?;
        let n = dataset.len();
        let x_theta: Vec<Vec<f64>> = dataset.rows().map(|o| norm.theta(&o.theta)).collect();
        let x_time: Vec<f64> = dataset.rows().map(|o| norm.time(o.t)).collect();
        let y = DVector::from_iterator(n, dataset.rows().map(|o| o.log_metric));

        if n == 0 {
            return Ok(Self {
                hyper,
                norm,
                x_theta,
                x_time,
                chol_l: DMatrix::zeros(0, 0),
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }

        let gram = build_gram(&x_theta, &x_time, &hyper)?;
        let (chol_l, jitter) = cholesky_with_jitter(&gram, hyper.noise_sigma)?;
        let mut alpha = y;
        solve_cholesky_in_place(&chol_l, &mut alpha);
        Ok(Self {
            hyper,
            norm,
            x_theta,
            x_time,
            chol_l,
            alpha,
            jitter,
        })
    }

    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyper
    }

    pub fn normalizer(&self) -> &InputNormalizer {
        &self.norm
    }

    pub fn num_training_points(&self) -> usize {
        self.x_time.len()
    }

    /// Diagonal jitter added to make the factorization succeed (usually 0).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior mean and (latent, noise-free) variance at a query point in
    /// raw coordinates. An empty model reverts to the zero-mean prior with
    /// variance `k((theta,t),(theta,t)) = 2 sigma_f^2`.
    pub fn predict(&self, theta: &[f64], t: f64) -> Result<(f64, f64), GpError> {
        let q_theta = self.norm.theta(theta);
        let q_t = self.norm.time(t);
        let prior_var = k_joint(&q_theta, q_t, &q_theta, q_t, &self.hyper)?;
        let n = self.x_time.len();
        if n == 0 {
            return Ok((0.0, prior_var));
        }
        let mut k_star = DVector::from_fn(n, |i, _| {
            k_joint(&self.x_theta[i], self.x_time[i], &q_theta, q_t, &self.hyper).unwrap()
        });
        let mean = k_star.dot(&self.alpha);
        self.chol_l
            .solve_lower_triangular_mut(&mut k_star)
            .then_some(())
            .expect("cholesky factor is nonsingular");
        let var = (prior_var - k_star.norm_squared()).max(0.0);
        Ok((mean, var))
    }

    /// Batched prediction; one triangular solve over all queries.
    pub fn predict_batch(&self, queries: &[(Vec<f64>, f64)]) -> Result<Vec<(f64, f64)>, GpError> {
        let n = self.x_time.len();
        let b = queries.len();
        if n == 0 {
            return queries
                .iter()
                .map(|(theta, t)| {
                    let qn = self.norm.theta(theta);
                    let tn = self.norm.time(*t);
                    Ok((0.0, k_joint(&qn, tn, &qn, tn, &self.hyper)?))
                })
                .collect();
        }
        let normalized: Vec<(Vec<f64>, f64)> = queries
            .iter()
            .map(|(theta, t)| (self.norm.theta(theta), self.norm.time(*t)))
            .collect();
        let mut k_star = DMatrix::from_fn(n, b, |i, j| {
            k_joint(
                &self.x_theta[i],
                self.x_time[i],
                &normalized[j].0,
                normalized[j].1,
                &self.hyper,
            )
            .unwrap()
        });
        let means: Vec<f64> = (0..b)
            .map(|j| k_star.column(j).dot(&self.alpha))
            .collect();
        self.chol_l
            .solve_lower_triangular_mut(&mut k_star)
            .then_some(())
            .expect("cholesky factor is nonsingular");
        Ok((0..b)
            .map(|j| {
                let (qn, tn) = &normalized[j];
                let prior = k_joint(qn, *tn, qn, *tn, &self.hyper).unwrap();
                let var = (prior - k_star.column(j).norm_squared()).max(0.0);
                (means[j], var)
            })
            .collect())
    }

    /// Fitted temporal lengthscale converted back to raw trading periods.
    /// With a split temporal kernel the faster component governs.
    pub fn temporal_lengthscale_periods(&self) -> f64 {
        let l = match self.hyper.temporal_l_split {
            Some(l_exp) => self.hyper.temporal_l.min(l_exp),
            None => self.hyper.temporal_l,
        };
        l * self.norm.time_span()
    }
}

/// Outcome of comparing the fitted temporal lengthscale to the trading
/// horizon: a lengthscale not much shorter than the horizon means the best
/// parameters carry no detectable time variation.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthscaleDiagnostic {
    pub time_varying: bool,
    pub ratio: f64,
}

/// `time_varying` iff `lengthscale_periods < horizon * ratio_threshold`
/// (strict). The reported ratio is lengthscale over horizon.
pub fn temporal_lengthscale_diagnostic(
    lengthscale_periods: f64,
    horizon: usize,
    ratio_threshold: f64,
) -> LengthscaleDiagnostic {
    let horizon = horizon.max(1) as f64;
    LengthscaleDiagnostic {
        time_varying: lengthscale_periods < horizon * ratio_threshold,
        ratio: lengthscale_periods / horizon,
    }
}

pub(crate) fn build_gram(
    x_theta: &[Vec<f64>],
    x_time: &[f64],
    h: &KernelHyperparams,
) -> Result<DMatrix<f64>, GpError> {
    let n = x_time.len();
    if let Some(row) = x_theta.first() {
        if row.len() != h.dim() {
            return Err(GpError::DimensionMismatch {
                expected: h.dim(),
                got: row.len(),
            });
        }
    }
    let rows = crate::par::map_indexed(n, |r| {
        let mut row = vec![0.0; n];
        for (c, item) in row.iter_mut().enumerate().take(r + 1) {
            *item = k_joint(&x_theta[r], x_time[r], &x_theta[c], x_time[c], h).unwrap();
        }
        row
    });
    let mut gram = DMatrix::zeros(n, n);
    for (r, row) in rows.iter().enumerate() {
        for c in 0..=r {
            gram[(r, c)] = row[c];
            gram[(c, r)] = row[c];
        }
    }
    Ok(gram)
}

/// Cholesky of `gram + noise^2 I`, escalating jitter from 1e-10 to 1e-6
/// (relative to the mean diagonal) on failure.
pub(crate) fn cholesky_with_jitter(
    gram: &DMatrix<f64>,
    noise_sigma: f64,
) -> Result<(DMatrix<f64>, f64), GpError> {
    let n = gram.nrows();
    let mean_diag = gram.diagonal().sum() / n as f64;
    let noise2 = noise_sigma * noise_sigma;
    let mut jitter = 0.0;
    for step in 0..6 {
        let mut k = gram.clone();
        for i in 0..n {
            k[(i, i)] += noise2 + jitter;
        }
        if let Some(chol) = k.cholesky() {
            return Ok((chol.unpack(), jitter));
        }
        jitter = mean_diag * 1e-10 * 10f64.powi(step);
    }
    Err(GpError::IllConditioned {
        max_jitter: mean_diag * 1e-6,
    })
}

/// Solves `L L' x = b` in place given the lower factor.
pub(crate) fn solve_cholesky_in_place(chol_l: &DMatrix<f64>, b: &mut DVector<f64>) {
    chol_l
        .solve_lower_triangular_mut(b)
        .then_some(())
        .expect("lower solve");
    chol_l
        .transpose()
        .solve_upper_triangular_mut(b)
        .then_some(())
        .expect("upper solve");
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_point_dataset(theta: Vec<f64>, t: f64, gross: f64) -> GpDataset {
        let mut d = GpDataset::new(10);
        d.push_return(theta, t, gross).unwrap();
        d
    }

    #[test]
    fn window_evicts_fifo() {
        let mut d = GpDataset::new(3);
        for t in 0..5 {
            d.push_return(vec![t as f64], t as f64, 1.0 + t as f64 * 0.01)
                .unwrap();
        }
        assert_eq!(d.len(), 3);
        let ts: Vec<f64> = d.rows().map(|o| o.t).collect();
        assert_eq!(ts, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn window_rejects_bad_rows() {
        let mut d = GpDataset::new(3);
        assert!(matches!(
            d.push_return(vec![0.0], 0.0, 0.0),
            Err(GpError::NonPositiveMetric(_))
        ));
        d.push_return(vec![0.0], 5.0, 1.0).unwrap();
        assert!(matches!(
            d.push_return(vec![0.0], 4.0, 1.0),
            Err(GpError::TimeOrder { .. })
        ));
        // Log transform: gross 1.0 stores target 0.
        assert_relative_eq!(d.rows().next().unwrap().log_metric, 0.0);
    }

    #[test]
    fn empty_model_reverts_to_prior() {
        let d = GpDataset::new(5);
        let h = KernelHyperparams::unit(1);
        let model = GpModel::with_hyperparams(&d, InputNormalizer::identity(1), h).unwrap();
        let (mean, var) = model.predict(&[0.4], 3.0).unwrap();
        assert_relative_eq!(mean, 0.0);
        assert_relative_eq!(var, 2.0, epsilon = 1e-14); // 2 sigma_f^2
    }

    #[test]
    fn one_point_posterior_closed_form() {
        let gross = 1.25f64;
        let y = gross.ln();
        let d = one_point_dataset(vec![0.2], 1.0, gross);
        let mut h = KernelHyperparams::unit(1);
        h.noise_sigma = 0.3;
        let model =
            GpModel::with_hyperparams(&d, InputNormalizer::identity(1), h.clone()).unwrap();

        let q = (vec![0.5], 2.0);
        let kxx = k_joint(&[0.2], 1.0, &[0.2], 1.0, &h).unwrap();
        let kqx = k_joint(&q.0, q.1, &[0.2], 1.0, &h).unwrap();
        let kqq = k_joint(&q.0, q.1, &q.0, q.1, &h).unwrap();
        let denom = kxx + h.noise_sigma * h.noise_sigma + model.jitter();
        let (mean, var) = model.predict(&q.0, q.1).unwrap();
        assert_relative_eq!(mean, kqx * y / denom, epsilon = 1e-12);
        assert_relative_eq!(var, kqq - kqx * kqx / denom, epsilon = 1e-12);
    }

    #[test]
    fn interpolates_training_point_at_tiny_noise() {
        let mut d = GpDataset::new(10);
        let targets = [1.1, 0.95, 1.02, 1.3];
        for (i, &g) in targets.iter().enumerate() {
            d.push_return(vec![0.2 * i as f64], i as f64, g).unwrap();
        }
        let mut h = KernelHyperparams::unit(1);
        h.noise_sigma = 1e-8;
        let model = GpModel::with_hyperparams(&d, InputNormalizer::identity(1), h).unwrap();
        for (i, &g) in targets.iter().enumerate() {
            let (mean, var) = model.predict(&[0.2 * i as f64], i as f64).unwrap();
            assert_relative_eq!(mean, g.ln(), epsilon = 1e-6);
            assert!(var >= 0.0 && var < 1e-4);
        }
    }

    #[test]
    fn variance_never_increases_with_data_at_query() {
        let q_theta = vec![0.5];
        let q_t = 5.0;
        let h = KernelHyperparams::unit(1);
        let mut d = GpDataset::new(50);
        let mut prev_var = f64::INFINITY;
        for rep in 0..5 {
            d.push_return(q_theta.clone(), q_t, 1.0 + 0.01 * rep as f64)
                .unwrap();
            let model =
                GpModel::with_hyperparams(&d, InputNormalizer::identity(1), h.clone()).unwrap();
            let (_, var) = model.predict(&q_theta, q_t).unwrap();
            assert!(var <= prev_var + 1e-9, "var {var} grew past {prev_var}");
            prev_var = var;
        }
    }

    #[test]
    fn predictions_exponentiate_safely() {
        let mut d = GpDataset::new(20);
        for i in 0..12 {
            d.push_return(vec![0.1 * i as f64], i as f64, 0.2 + 0.3 * i as f64)
                .unwrap();
        }
        let model = GpModel::with_hyperparams(
            &d,
            InputNormalizer::from_bounds(&[(0.0, 1.2)], 0.0, 11.0),
            KernelHyperparams::unit(1),
        )
        .unwrap();
        for i in 0..24 {
            let (mean, var) = model.predict(&[0.05 * i as f64], 12.0).unwrap();
            assert!(mean.exp().is_finite());
            assert!(var.is_finite() && var >= 0.0);
        }
    }

    #[test]
    fn diagnostic_branches() {
        let d = temporal_lengthscale_diagnostic(1000.0, 100, 1.0);
        assert!(!d.time_varying);
        assert_relative_eq!(d.ratio, 10.0);
        let d = temporal_lengthscale_diagnostic(1.0, 100, 1.0);
        assert!(d.time_varying);
        // Exactly at the threshold: strict inequality, not time varying.
        let d = temporal_lengthscale_diagnostic(100.0, 100, 1.0);
        assert!(!d.time_varying);
    }

    #[test]
    fn duplicate_rows_at_zero_noise_need_jitter() {
        let mut d = GpDataset::new(10);
        d.push_return(vec![0.5], 1.0, 1.1).unwrap();
        d.push_return(vec![0.5], 1.0, 1.1).unwrap();
        let mut h = KernelHyperparams::unit(1);
        h.noise_sigma = 1e-12;
        // The exact duplicate makes the Gram singular; the jitter ladder
        // must engage rather than fail outright.
        let model = GpModel::with_hyperparams(&d, InputNormalizer::identity(1), h).unwrap();
        assert!(model.jitter() > 0.0);
    }
}
