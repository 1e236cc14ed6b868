use super::{LocScaleGrad, LocScaleParams};
use crate::error::{Error, Result};
use crate::special::{lgamma, psi};
use std::f64::consts::PI;

/// Multivariate Student's t with `nu` degrees of freedom.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentTParams {
    pub loc_scale: LocScaleParams,
    pub nu: f64,
}

impl StudentTParams {
    pub fn new(loc_scale: LocScaleParams, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!("degrees of freedom must be > 0, got {nu}")));
        }
        Ok(Self { loc_scale, nu })
    }

    /// Entropic index of the one-dimensional density, `q = 1 + 2/(ν+1)`.
    pub fn entropic_index(&self) -> f64 {
        1.0 + 2.0 / (self.nu + 1.0)
    }
}

/// Gradient of the Student's t log-density.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentTGrad {
    pub loc_scale: LocScaleGrad,
    pub nu: f64,
}

/// `ln Γ((N+ν)/2) - ln Γ(ν/2) - (N/2) ln(νπ) - ½ ln|Σ| - ((N+ν)/2) ln(1 + m/ν)`.
pub fn log_prob_student_t(params: &StudentTParams, a: &[f64]) -> Result<f64> {
    let ls = &params.loc_scale;
    let (m, _) = ls.mahalanobis(a)?;
    let (n, nu) = (ls.dim() as f64, params.nu);
    Ok(lgamma(0.5 * (n + nu)) - lgamma(0.5 * nu) - 0.5 * n * (nu * PI).ln()
        - 0.5 * ls.scale_chol.log_det_covariance()
        - 0.5 * (n + nu) * (m / nu).ln_1p())
}

/// Gradients with respect to `μ`, `Σ` and `ν`.
///
/// `∂/∂ν = ½ψ((N+ν)/2) - ½ψ(ν/2) - N/(2ν) - ½ ln(1 + m/ν) + (N+ν) m / (2ν(ν+m))`.
pub fn grad_log_prob_student_t(params: &StudentTParams, a: &[f64]) -> Result<StudentTGrad> {
    let ls = &params.loc_scale;
    let (m, w) = ls.mahalanobis(a)?;
    let (n, nu) = (ls.dim() as f64, params.nu);
    let dg_dm = -0.5 * (n + nu) / (nu + m);
    let grad_nu = 0.5 * (psi(0.5 * (n + nu)) - psi(0.5 * nu)) - 0.5 * n / nu
        - 0.5 * (m / nu).ln_1p()
        + 0.5 * (n + nu) * m / (nu * (nu + m));
    Ok(StudentTGrad { loc_scale: ls.elliptical_grad(&w, dg_dm), nu: grad_nu })
}
