//! Independent numerical ground truth: adaptive quadrature, central finite
//! differences, brute-force simplex projection and goodness-of-fit
//! statistics.
//!
//! Nothing here calls into the densities, samplers or gradients it is used to
//! check; it depends only on plain `f64` arithmetic and the scalar deformed
//! functions.

mod finite_diff;
mod fit;
mod quadrature;
mod simplex;

pub use finite_diff::{finite_diff_gradient, max_relative_error, relative_error};
pub use fit::{
    chi2_critical_001, chi2_test, cdf_at_sorted, ks_statistic, ks_test, ks_test_density,
    ks_threshold, two_sample_ks, FitTestResult,
};
pub use quadrature::{integrate, integrate_adaptive, QuadratureResult, QuadratureSpec};
pub use simplex::project_simplex_bruteforce;

use crate::samplers::Rng;

/// Importance-sampled estimate of `∫ exp(log_f(x)) dx` over `R^n` using a
/// product of independent Cauchy proposals with location `center` and
/// per-dimension `scale`. Returns `(estimate, standard_error)`.
pub fn importance_normalization(
    mut log_f: impl FnMut(&[f64]) -> f64,
    center: &[f64],
    scale: &[f64],
    draws: usize,
    rng: &mut Rng,
) -> (f64, f64) {
    use std::f64::consts::PI;
    let n = center.len();
    let mut x = vec![0.0; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let mut log_g = 0.0;
        for i in 0..n {
            let t = (PI * (rng.open01() - 0.5)).tan();
            x[i] = center[i] + scale[i] * t;
            log_g += -(PI * scale[i]).ln() - t.mul_add(t, 1.0).ln();
        }
        let w = (log_f(&x) - log_g).exp();
        sum += w;
        sum_sq += w * w;
    }
    let m = sum / draws as f64;
    let var = (sum_sq / draws as f64 - m * m).max(0.0);
    (m, (var / draws as f64).sqrt())
}
