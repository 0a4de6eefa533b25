//! Space-filling latin hypercube designs.

use rand::seq::SliceRandom;
use rand::Rng;

/// `n` points inside the box, exactly one per equal-width stratum in each
/// dimension. Deterministic for a given RNG state.
pub fn lhs_design<R: Rng>(bounds: &[(f64, f64)], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = bounds.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for &(lo, hi) in bounds {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        let col: Vec<f64> = strata
            .iter()
            .map(|&s| {
                let u: f64 = rng.random();
                lo + (s as f64 + u) / n as f64 * (hi - lo)
            })
            .collect();
        columns.push(col);
    }
    (0..n)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect()
}
