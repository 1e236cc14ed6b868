//! Multivariate q-Gaussian `π(a) = C |Σ|^{-½} exp_q(-½ (a-μ)ᵀ Σ⁻¹ (a-μ))`.
//!
//! Normalizers are the exact integrals of the kernel over `R^N`:
//!
//! ```text
//! q < 1,  n = 1/(1-q):  C = ((1-q)/2)^{N/2} Γ(n + 1 + N/2) / (Γ(n + 1) π^{N/2})
//! q > 1,  k = 1/(q-1):  C = ((q-1)/2)^{N/2} Γ(k) / (Γ(k - N/2) π^{N/2})
//! ```
//!
//! The heavy-tailed kernel is integrable only while `k > N/2`, i.e.
//! `q < 1 + 2/N`. In one dimension this is the familiar `q < 3`.

use super::{LocScaleGrad, LocScaleParams};
use crate::deformed::EntropicIndex;
use crate::error::{Error, Result};
use crate::special::lgamma;
use std::f64::consts::PI;

/// q-Gaussian with a fixed entropic index.
#[derive(Clone, Debug, PartialEq)]
pub struct QGaussianParams {
    pub loc_scale: LocScaleParams,
    pub q: EntropicIndex,
}

impl QGaussianParams {
    pub fn new(loc_scale: LocScaleParams, q: impl Into<EntropicIndex>) -> Result<Self> {
        let q = q.into();
        check_index(q, loc_scale.dim())?;
        Ok(Self { loc_scale, q })
    }
}

fn check_index(q: EntropicIndex, n: usize) -> Result<()> {
    let qv = q.get();
    if !qv.is_finite() || qv >= 3.0 {
        return Err(Error::domain(format!("q-Gaussian requires q < 3, got {qv}")));
    }
    if q.is_unit() {
        return Err(Error::domain("q = 1 is the Gaussian family"));
    }
    if q.is_heavy_tailed() && 1.0 / (qv - 1.0) <= 0.5 * n as f64 {
        return Err(Error::domain(format!(
            "q-Gaussian with q = {qv} is not normalizable in {n} dimensions (needs q < {})",
            1.0 + 2.0 / n as f64
        )));
    }
    Ok(())
}

/// `ln C` for the unit-scale density in `n` dimensions.
pub fn log_normalizer_q_gaussian(q: impl Into<EntropicIndex>, n: usize) -> Result<f64> {
    let q = q.into();
    let nf = n as f64;
    if q.is_unit() {
        return Ok(-0.5 * nf * (2.0 * PI).ln());
    }
    check_index(q, n)?;
    let qv = q.get();
    Ok(if qv < 1.0 {
        let e = 1.0 / (1.0 - qv);
        0.5 * nf * (0.5 * (1.0 - qv)).ln() + lgamma(e + 1.0 + 0.5 * nf)
            - lgamma(e + 1.0)
            - 0.5 * nf * PI.ln()
    } else {
        let k = 1.0 / (qv - 1.0);
        0.5 * nf * (0.5 * (qv - 1.0)).ln() + lgamma(k) - lgamma(k - 0.5 * nf) - 0.5 * nf * PI.ln()
    })
}

/// Normalizing constant `Z = σ^N / C` of the isotropic q-Gaussian, i.e. the
/// integral of `exp_q(-|a-μ|²/(2σ²))` over `R^N`.
pub fn partition_q_gaussian(sigma: f64, q: impl Into<EntropicIndex>, n: usize) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let ln_c = log_normalizer_q_gaussian(q, n)?;
    Ok((n as f64 * sigma.ln() - ln_c).exp())
}

/// Squared Mahalanobis radius of the support: `2/(1-q)` for light tails,
/// `+inf` otherwise.
pub fn support_radius_sq(q: impl Into<EntropicIndex>) -> f64 {
    let q = q.into();
    if q.is_light_tailed() {
        2.0 / (1.0 - q.get())
    } else {
        f64::INFINITY
    }
}

fn inside(q: EntropicIndex, m: f64) -> bool {
    m < support_radius_sq(q)
}

/// True iff `(a-μ)ᵀ Σ⁻¹ (a-μ) < 2/(1-q)`; always true for heavy tails.
/// Returns false on a dimension mismatch.
pub fn support_contains(params: &QGaussianParams, a: &[f64]) -> bool {
    match params.loc_scale.mahalanobis(a) {
        Ok((m, _)) => inside(params.q, m),
        Err(_) => false,
    }
}

/// Log-density; `-inf` exactly when `a` is outside a light-tailed support.
pub fn log_prob_q_gaussian(params: &QGaussianParams, a: &[f64]) -> Result<f64> {
    let ls = &params.loc_scale;
    let (m, _) = ls.mahalanobis(a)?;
    if !inside(params.q, m) {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_c = log_normalizer_q_gaussian(params.q, ls.dim())?;
    let qv = params.q.get();
    // ln exp_q(-m/2) = ln(1 - (1-q) m/2) / (1-q)
    let kernel = (-(1.0 - qv) * 0.5 * m).ln_1p() / (1.0 - qv);
    Ok(ln_c - 0.5 * ls.scale_chol.log_det_covariance() + kernel)
}

/// Gaussian-shaped gradients scaled by `1 / exp_q(-m/2)^{1-q}`.
pub fn grad_log_prob_q_gaussian(params: &QGaussianParams, a: &[f64]) -> Result<LocScaleGrad> {
    let ls = &params.loc_scale;
    let (m, w) = ls.mahalanobis(a)?;
    if !inside(params.q, m) {
        return Err(Error::UndefinedGradient(
            "action lies on or outside the light-tailed support".into(),
        ));
    }
    // exp_q(-m/2)^{1-q} = 1 - (1-q) m/2
    let scale = 1.0 - (1.0 - params.q.get()) * 0.5 * m;
    Ok(ls.elliptical_grad(&w, -0.5 / scale))
}
