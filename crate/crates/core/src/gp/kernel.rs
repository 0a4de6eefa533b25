//! Spatiotemporal covariance: a product rational-quadratic kernel over the
//! parameter dimensions times a temporal kernel that is the sum of an
//! exponential (abrupt changes) and a rational-quadratic (smooth changes)
//! term. The joint kernel is the product of the two factors.

use super::{GpError, KernelHyperparams};

/// Parameter-space kernel:
/// `sigma_f^2 * prod_i (1 + d_i^2 / (2 alpha_i l_i^2))^(-alpha_i)`.
pub fn k_param(
    theta: &[f64],
    theta2: &[f64],
    h: &KernelHyperparams,
) -> Result<f64, GpError> {
    let d = h.dim();
    if theta.len() != d || theta2.len() != d {
        return Err(GpError::DimensionMismatch {
            expected: d,
            got: theta.len().max(theta2.len()),
        });
    }
    let mut k = h.sigma_f * h.sigma_f;
    for i in 0..d {
        let u = (theta[i] - theta2[i]).powi(2);
        let b = 1.0 + u / (2.0 * h.alphas[i] * h.lengthscales[i] * h.lengthscales[i]);
        k *= b.powf(-h.alphas[i]);
    }
    Ok(k)
}

/// Temporal kernel: `exp(-|dt| / l_exp) + (1 + dt^2 / (2 alpha l^2))^(-alpha)`.
/// Peaks at 2 for `dt = 0`.
pub fn k_temporal(t: f64, t2: f64, h: &KernelHyperparams) -> f64 {
    let dt = t - t2;
    let e = (-dt.abs() / h.temporal_l_exp()).exp();
    let b = 1.0 + dt * dt / (2.0 * h.temporal_alpha * h.temporal_l * h.temporal_l);
    e + b.powf(-h.temporal_alpha)
}

/// Joint spatiotemporal covariance: `k_param * k_temporal`.
pub fn k_joint(
    theta: &[f64],
    t: f64,
    theta2: &[f64],
    t2: f64,
    h: &KernelHyperparams,
) -> Result<f64, GpError> {
    Ok(k_param(theta, theta2, h)? * k_temporal(t, t2, h))
}

/// Evaluates one kernel pair together with the derivatives of the value with
/// respect to every log-hyperparameter except the observation noise (whose
/// Gram derivative is diagonal and handled by the caller).
///
/// `grad_out` is laid out like [`KernelHyperparams::to_log_vector`] minus the
/// trailing noise entry; callers reuse the buffer across the Gram matrix.
pub(crate) fn eval_with_grad(
    theta: &[f64],
    t: f64,
    theta2: &[f64],
    t2: f64,
    h: &KernelHyperparams,
    grad_out: &mut [f64],
) -> f64 {
    let d = h.dim();
    debug_assert_eq!(grad_out.len(), h.log_dim() - 1);

    // Spatial factor; stash each factor's log-derivative, scaled by k below.
    let mut k_p = h.sigma_f * h.sigma_f;
    let spatial_base = 1;
    for i in 0..d {
        let li = h.lengthscales[i];
        let ai = h.alphas[i];
        let u = (theta[i] - theta2[i]).powi(2);
        let b = 1.0 + u / (2.0 * ai * li * li);
        k_p *= b.powf(-ai);
        grad_out[spatial_base + i] = u / (li * li * b);
        grad_out[spatial_base + d + i] = -ai * b.ln() + u / (2.0 * li * li * b);
    }

    // Temporal factor.
    let dt = t - t2;
    let dist = dt.abs();
    let v = dt * dt;
    let l_exp = h.temporal_l_exp();
    let e = (-dist / l_exp).exp();
    let l_rq = h.temporal_l;
    let a_t = h.temporal_alpha;
    let b_t = 1.0 + v / (2.0 * a_t * l_rq * l_rq);
    let c = b_t.powf(-a_t);
    let k_t = e + c;

    let k = k_p * k_t;

    // d/d ln sigma_f.
    grad_out[0] = 2.0 * k;
    // Spatial entries currently hold per-factor log-derivatives; scale by k.
    for i in 0..d {
        grad_out[spatial_base + i] *= k;
        grad_out[spatial_base + d + i] *= k;
    }

    let mut idx = spatial_base + 2 * d;
    let d_e = e * dist / l_exp; // d e / d ln l_exp
    let d_c_l = c * v / (l_rq * l_rq * b_t); // d c / d ln l_rq
    if h.split_temporal() {
        grad_out[idx] = k_p * d_c_l; // ln temporal_l (RQ part)
        idx += 1;
        grad_out[idx] = k_p * d_e; // ln temporal_l_exp
        idx += 1;
    } else {
        grad_out[idx] = k_p * (d_e + d_c_l); // shared lengthscale
        idx += 1;
    }
    // d/d ln temporal_alpha.
    grad_out[idx] = k_p * c * (-a_t * b_t.ln() + v / (2.0 * l_rq * l_rq * b_t));

    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelHyperparams;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn unit_hyper(d: usize) -> KernelHyperparams {
        KernelHyperparams::unit(d)
    }

    #[test]
    fn param_kernel_at_zero_distance_is_amplitude() {
        let h = unit_hyper(2);
        let k = k_param(&[0.3, 0.7], &[0.3, 0.7], &h).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-15);
        let mut h2 = h.clone();
        h2.sigma_f = 2.0;
        let k2 = k_param(&[0.3, 0.7], &[0.3, 0.7], &h2).unwrap();
        assert_relative_eq!(k2, 4.0, epsilon = 1e-15);
    }

    #[test]
    fn param_kernel_hand_value() {
        // D=1, sigma_f=1, l=1, alpha=1, |d|=sqrt(2): (1 + 2/2)^-1 = 0.5.
        let h = unit_hyper(1);
        let k = k_param(&[0.0], &[2f64.sqrt()], &h).unwrap();
        assert_relative_eq!(k, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn amplitude_scales_everywhere() {
        let h = unit_hyper(1);
        let mut h4 = h.clone();
        h4.sigma_f = 2.0;
        for dx in [0.0, 0.5, 1.7, 3.0] {
            let base = k_param(&[0.0], &[dx], &h).unwrap();
            let scaled = k_param(&[0.0], &[dx], &h4).unwrap();
            assert_relative_eq!(scaled, 4.0 * base, epsilon = 1e-13);
        }
    }

    #[test]
    fn param_kernel_peaks_at_zero_distance() {
        let h = unit_hyper(3);
        let a = [0.1, 0.5, 0.9];
        let peak = k_param(&a, &a, &h).unwrap();
        for other in [[0.2, 0.5, 0.9], [0.9, 0.1, 0.4], [0.1, 0.5, 0.91]] {
            assert!(k_param(&a, &other, &h).unwrap() <= peak);
        }
    }

    #[test]
    fn temporal_kernel_values() {
        let h = unit_hyper(0);
        assert_relative_eq!(k_temporal(5.0, 5.0, &h), 2.0, epsilon = 1e-15);
        // l=1, alpha=1, |dt|=1: e^-1 + (1.5)^-1.
        let expected = (-1.0f64).exp() + 1.0 / 1.5;
        assert_relative_eq!(k_temporal(1.0, 2.0, &h), expected, epsilon = 1e-14);
        assert_relative_eq!(k_temporal(1.0, 2.0, &h), 1.03453, epsilon = 1e-5);
        // Decay limit.
        assert!(k_temporal(0.0, 1e8, &h) < 1e-6);
    }

    #[test]
    fn temporal_symmetry() {
        let h = unit_hyper(0);
        for dt in [0.1, 1.0, 7.3] {
            assert_relative_eq!(k_temporal(0.0, dt, &h), k_temporal(dt, 0.0, &h));
        }
    }

    #[test]
    fn joint_is_product_of_factors() {
        let h = unit_hyper(2);
        let k = k_joint(&[0.1, 0.2], 3.0, &[0.4, 0.9], 5.0, &h).unwrap();
        let kp = k_param(&[0.1, 0.2], &[0.4, 0.9], &h).unwrap();
        let kt = k_temporal(3.0, 5.0, &h);
        assert_relative_eq!(k, kp * kt, epsilon = 1e-15);
        // Identical inputs: product of peaks = 2 sigma_f^2.
        let peak = k_joint(&[0.1, 0.2], 3.0, &[0.1, 0.2], 3.0, &h).unwrap();
        assert_relative_eq!(peak, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn random_gram_is_psd() {
        let h = KernelHyperparams {
            sigma_f: 1.3,
            lengthscales: vec![0.4, 1.1],
            alphas: vec![0.7, 2.0],
            temporal_l: 0.8,
            temporal_l_split: None,
            temporal_alpha: 1.5,
            noise_sigma: 1e-3,
        };
        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        let n = 20;
        let points: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| (vec![next() * 2.0, next() * 2.0], next() * 10.0))
            .collect();
        let gram = DMatrix::from_fn(n, n, |r, c| {
            k_joint(&points[r].0, points[r].1, &points[c].0, points[c].1, &h).unwrap()
        });
        let eig = gram.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-8, "min eigenvalue {min}");
    }
}
