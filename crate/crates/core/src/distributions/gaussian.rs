use super::{LocScaleGrad, LocScaleParams};
use crate::error::Result;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln N(a; μ, Σ)`.
pub fn log_prob_gaussian(params: &LocScaleParams, a: &[f64]) -> Result<f64> {
    let (m, _) = params.mahalanobis(a)?;
    let n = params.dim() as f64;
    Ok(-0.5 * n * LN_2PI - 0.5 * params.scale_chol.log_det_covariance() - 0.5 * m)
}

/// `∇_μ ln N = Σ⁻¹(a-μ)`, `∇_Σ ln N = -½(Σ⁻¹ - Σ⁻¹(a-μ)(a-μ)ᵀΣ⁻¹)`.
pub fn grad_log_prob_gaussian(params: &LocScaleParams, a: &[f64]) -> Result<LocScaleGrad> {
    let (_, w) = params.mahalanobis(a)?;
    Ok(params.elliptical_grad(&w, -0.5))
}
