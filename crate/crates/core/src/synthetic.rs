//! Bundled synthetic markets and objective maps.
//!
//! The real datasets behind the published tables are distributed separately,
//! so verification runs on generated markets with known structure: a
//! regime-switch market whose optimal reversion sensitivity changes halfway,
//! a drifting momentum market, and direct synthetic objective maps for
//! exercising the oracle's tracking behaviour.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::market::PriceRelativeSeries;
use crate::oracle::{ConfigOracle, OracleConfig, OracleError};

/// Two-asset mirror market with two 250-day regimes.
///
/// Days 1-250 alternate the winning asset deterministically (strong one-day
/// mean reversion: aggressive reversion bets pay every day). Days 251-500
/// hold the winning asset fixed within 50-day blocks (momentum: the same
/// bets bleed). The optimal PAMR sensitivity is therefore small in the first
/// regime and large (fully passive) in the second.
pub fn regime_switch_market(seed: u64) -> PriceRelativeSeries {
    const REGIME_DAYS: usize = 250;
    const BLOCK: usize = 50;
    const AMPLITUDE: f64 = 0.05;
    const NOISE: f64 = 0.002;

    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_11a5_7e11_u64);
    let noise = Normal::new(0.0, NOISE).expect("valid");
    let mut rows = Vec::with_capacity(2 * REGIME_DAYS);

    for day in 0..REGIME_DAYS {
        let winner = day % 2;
        rows.push(mirror_row(winner, AMPLITUDE, &noise, &mut rng));
    }
    for day in 0..REGIME_DAYS {
        let block = day / BLOCK;
        // Direction fixed per block, drawn deterministically from the seed.
        let mut block_rng = ChaCha20Rng::seed_from_u64(seed ^ (0xb10c_u64 << 16) ^ block as u64);
        let winner = usize::from(block_rng.random::<bool>());
        rows.push(mirror_row(winner, AMPLITUDE, &noise, &mut rng));
    }
    PriceRelativeSeries::new(rows, Some(vec!["revert".into(), "counter".into()]))
        .expect("generated rows are positive")
}

fn mirror_row<R: Rng>(winner: usize, amplitude: f64, noise: &Normal<f64>, rng: &mut R) -> Vec<f64> {
    let mut row = vec![0.0; 2];
    for (i, r) in row.iter_mut().enumerate() {
        let sign = if i == winner { 1.0 } else { -1.0 };
        let eps: f64 = noise.sample(rng);
        *r = (1.0 + sign * amplitude + eps).max(0.5);
    }
    row
}

/// Multi-asset market where one asset trends up for a stretch before the
/// leadership rotates; momentum strategies profit, reversion bleeds.
pub fn drifting_momentum_market(
    num_assets: usize,
    num_days: usize,
    seed: u64,
) -> PriceRelativeSeries {
    let m = num_assets.max(2);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xd81f_7000_u64);
    let noise = Normal::new(0.0, 0.004).expect("valid");
    let stretch = 60usize;
    let mut leader = 0usize;
    let mut rows = Vec::with_capacity(num_days);
    for day in 0..num_days {
        if day % stretch == 0 {
            leader = rng.random_range(0..m);
        }
        let mut row = vec![0.0; m];
        for (i, r) in row.iter_mut().enumerate() {
            let drift = if i == leader { 0.004 } else { -0.001 };
            let eps: f64 = noise.sample(&mut rng);
            *r = (1.0 + drift + eps).max(0.5);
        }
        rows.push(row);
    }
    PriceRelativeSeries::new(rows, None).expect("generated rows are positive")
}

/// A synthetic configuration map fed straight to the oracle: the observed
/// gross return is `exp(value(theta, t) + noise)`.
pub struct SyntheticMap {
    pub bounds: Vec<(f64, f64)>,
    pub value: Box<dyn Fn(&[f64], usize) -> f64 + Sync>,
    pub noise_sigma: f64,
}

impl SyntheticMap {
    /// Stationary concave map peaking at `optimum` on [0, 1].
    pub fn stationary(optimum: f64, noise_sigma: f64) -> Self {
        Self {
            bounds: vec![(0.0, 1.0)],
            value: Box::new(move |theta, _| -(theta[0] - optimum).powi(2)),
            noise_sigma,
        }
    }

    /// Peak drifting linearly from `start` to `end` over `horizon` periods.
    pub fn linear_drift(start: f64, end: f64, horizon: usize, noise_sigma: f64) -> Self {
        let span = (horizon.max(2) - 1) as f64;
        Self {
            bounds: vec![(0.0, 1.0)],
            value: Box::new(move |theta, t| {
                let c = start + (end - start) * (t.saturating_sub(1)) as f64 / span;
                -(theta[0] - c).powi(2)
            }),
            noise_sigma,
        }
    }
}

/// Runs the oracle against a synthetic map for `horizon` periods and returns
/// the chosen parameter trace.
pub fn run_oracle_on_map(
    map: &SyntheticMap,
    horizon: usize,
    cfg: OracleConfig,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let mut oracle = ConfigOracle::new(map.bounds.clone(), cfg.clone())?;
    let mut noise_rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0xface_0ff5_u64);
    let noise = Normal::new(0.0, map.noise_sigma.max(1e-300)).expect("valid");
    let mut chosen = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let theta = oracle.next_params(t)?;
        let eps: f64 = if map.noise_sigma > 0.0 {
            noise.sample(&mut noise_rng)
        } else {
            0.0
        };
        let gross = ((map.value)(&theta, t) + eps).exp();
        oracle.observe(gross)?;
        chosen.push(theta);
    }
    Ok(chosen)
}
