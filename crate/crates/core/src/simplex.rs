//! Projections onto the probability simplex.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::strategies::Portfolio;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("non-finite input component at index {0}")]
    NonFinite(usize),
    #[error("empty input vector")]
    Empty,
    #[error("metric projection did not converge")]
    MetricProjectionFailed,
}

/// Euclidean projection of `v` onto `{ w : sum w = 1, w >= 0 }`.
///
/// Sort-based algorithm: with components in decreasing order, the projection
/// is `max(v_i - tau, 0)` where `tau` is chosen so active components sum to 1.
pub fn simplex_project(v: &[f64]) -> Result<Portfolio, SimplexError> {
    if v.is_empty() {
        return Err(SimplexError::Empty);
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(SimplexError::NonFinite(i));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    let w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    Ok(Portfolio::normalized(w))
}

/// Projection of `q` onto the simplex in the norm induced by a symmetric
/// positive-definite matrix `a`: `argmin (w-q)' A (w-q)`.
///
/// Primal active-set method: solve the equality-constrained KKT system on
/// the current support, clip newly negative coordinates, and re-admit
/// coordinates with negative multipliers until the KKT conditions hold.
pub fn simplex_project_metric(
    a: &DMatrix<f64>,
    q: &DVector<f64>,
) -> Result<Portfolio, SimplexError> {
    let m = q.len();
    if m == 0 {
        return Err(SimplexError::Empty);
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(SimplexError::NonFinite(0));
    }
    let aq = a * q;
    let mut support: Vec<bool> = vec![true; m];

    // Each outer pass either shrinks or grows the support; the exact method
    // terminates, the cap is a numerical safety net.
    for _ in 0..4 * m + 16 {
        let idx: Vec<usize> = (0..m).filter(|&i| support[i]).collect();
        let k = idx.len();
        if k == 0 {
            return Err(SimplexError::MetricProjectionFailed);
        }
        // KKT system on the support: A_SS w_S + gamma 1 = (A q)_S, 1' w_S = 1.
        let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut rhs = DVector::<f64>::zeros(k + 1);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                kkt[(r, c)] = a[(i, j)];
            }
            kkt[(r, k)] = 1.0;
            kkt[(k, r)] = 1.0;
            rhs[r] = aq[i];
        }
        rhs[k] = 1.0;
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or(SimplexError::MetricProjectionFailed)?;

        let tol = 1e-12;
        if let Some((worst, _)) = idx
            .iter()
            .enumerate()
            .map(|(r, &i)| (i, sol[r]))
            .filter(|&(_, w)| w < -tol)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            support[worst] = false;
            continue;
        }

        let mut w = DVector::<f64>::zeros(m);
        for (r, &i) in idx.iter().enumerate() {
            w[i] = sol[r].max(0.0);
        }
        let gamma = sol[k];

        // Dual feasibility off the support: mu_i = (A w - A q + gamma 1)_i >= 0.
        let grad = a * &w - &aq;
        let violator = (0..m)
            .filter(|&i| !support[i])
            .map(|i| (i, grad[i] + gamma))
            .filter(|&(_, mu)| mu < -1e-9)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        match violator {
            Some((i, _)) => support[i] = true,
            None => return Ok(Portfolio::normalized(w.iter().copied().collect())),
        }
    }
    Err(SimplexError::MetricProjectionFailed)
}
