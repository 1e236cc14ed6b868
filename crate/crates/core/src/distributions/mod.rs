//! Exact densities, log-likelihood gradients and support predicates for the
//! policy families, plus the discrete sparsemax transform.
//!
//! Location-scale families share one structure: every log-density has the
//! form `c - ½ ln|Σ| + g(m)` with `m = (a-μ)ᵀ Σ⁻¹ (a-μ)`, so the gradients
//! with respect to `μ` and `Σ` follow from `g'(m)` alone:
//!
//! ```text
//! ∇_μ ln π = -2 g'(m) Σ⁻¹ (a-μ)
//! ∇_Σ ln π = -½ Σ⁻¹ - g'(m) Σ⁻¹ (a-μ)(a-μ)ᵀ Σ⁻¹
//! ```
//!
//! For the Gaussian `g'(m) = -½`, which makes `∇_μ ln π = +Σ⁻¹(a-μ)`.

mod beta;
mod gaussian;
mod q_gaussian;
mod sparsemax;
mod squashed;
mod student_t;

pub use beta::{grad_log_prob_beta, log_prob_beta, BetaGrad, BetaParams};
pub use gaussian::{grad_log_prob_gaussian, log_prob_gaussian};
pub use q_gaussian::{
    grad_log_prob_q_gaussian, log_normalizer_q_gaussian, log_prob_q_gaussian,
    partition_q_gaussian, support_contains, support_radius_sq, QGaussianParams,
};
pub use sparsemax::{sparsemax, sparsemax_threshold, SparsemaxInput};
pub use squashed::{log_prob_squashed_gaussian, SQUASH_EPSILON};
pub use student_t::{grad_log_prob_student_t, log_prob_student_t, StudentTGrad, StudentTParams};

use crate::error::{check_dim, Error, Result};
use crate::linalg::CholeskyFactor;

/// Location `μ` and Cholesky factor `L` of the scale matrix `Σ = L Lᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocScaleParams {
    pub mu: Vec<f64>,
    pub scale_chol: CholeskyFactor,
}

impl LocScaleParams {
    pub fn new(mu: Vec<f64>, scale_chol: CholeskyFactor) -> Result<Self> {
        check_dim(scale_chol.dim(), mu.len())?;
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("location must be finite"));
        }
        Ok(Self { mu, scale_chol })
    }

    /// Diagonal scale with standard deviations `sigma`.
    pub fn diagonal(mu: Vec<f64>, sigma: &[f64]) -> Result<Self> {
        Self::new(mu, CholeskyFactor::from_diagonal(sigma)?)
    }

    /// Isotropic one-dimensional convenience constructor.
    pub fn scalar(mu: f64, sigma: f64) -> Result<Self> {
        Self::diagonal(vec![mu], &[sigma])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Mahalanobis form of `a` and `w = Σ⁻¹ (a - μ)`.
    pub(crate) fn mahalanobis(&self, a: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), a.len())?;
        let r: Vec<f64> = a.iter().zip(&self.mu).map(|(x, m)| x - m).collect();
        Ok(self.scale_chol.mahalanobis(&r))
    }

    /// Gradients of `c - ½ ln|Σ| + g(m)` given `w` and `g'(m)`.
    pub(crate) fn elliptical_grad(&self, w: &[f64], dg_dm: f64) -> LocScaleGrad {
        let n = self.dim();
        let mu = w.iter().map(|wi| -2.0 * dg_dm * wi).collect();
        let mut sigma = self.scale_chol.covariance_inverse();
        for i in 0..n {
            for j in 0..n {
                sigma[i * n + j] = -0.5 * sigma[i * n + j] - dg_dm * w[i] * w[j];
            }
        }
        LocScaleGrad { mu, sigma }
    }
}

/// Gradient of a log-density with respect to `μ` and to `Σ`.
///
/// `sigma` treats the entries of `Σ` as independent (row-major `n × n`,
/// symmetric); use [`LocScaleGrad::chol`] or [`LocScaleGrad::diag_scale`] to
/// move to the factor parametrization.
#[derive(Clone, Debug, PartialEq)]
pub struct LocScaleGrad {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl LocScaleGrad {
    /// Gradient with respect to the lower-triangular factor `L`.
    pub fn chol(&self, l: &CholeskyFactor) -> Vec<f64> {
        l.chain_covariance_grad(&self.sigma)
    }

    /// Gradient with respect to the diagonal entries of `L`, holding the
    /// off-diagonal entries fixed.
    pub fn diag_scale(&self, l: &CholeskyFactor) -> Vec<f64> {
        let n = l.dim();
        let full = self.chol(l);
        (0..n).map(|i| full[i * n + i]).collect()
    }
}

/// One of the supported policy families with concrete parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyDistribution {
    Gaussian(LocScaleParams),
    /// Gaussian pushed through `tanh`; lives on `(-1, 1)^N`.
    SquashedGaussian(LocScaleParams),
    StudentT(StudentTParams),
    QGaussian(QGaussianParams),
    Beta(BetaParams),
}

/// Log-likelihood gradient for any [`PolicyDistribution`].
#[derive(Clone, Debug, PartialEq)]
pub enum ParamGrad {
    LocScale(LocScaleGrad),
    StudentT(StudentTGrad),
    Beta(BetaGrad),
}

impl PolicyDistribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(p) | Self::SquashedGaussian(p) => p.dim(),
            Self::StudentT(p) => p.loc_scale.dim(),
            Self::QGaussian(p) => p.loc_scale.dim(),
            Self::Beta(p) => p.dim(),
        }
    }

    /// Log-density at `a`. Light-tailed q-Gaussians return `-inf` outside
    /// their support; the other families error on out-of-domain actions.
    pub fn log_prob(&self, a: &[f64]) -> Result<f64> {
        match self {
            Self::Gaussian(p) => log_prob_gaussian(p, a),
            Self::SquashedGaussian(p) => log_prob_squashed_gaussian(p, a),
            Self::StudentT(p) => log_prob_student_t(p, a),
            Self::QGaussian(p) => log_prob_q_gaussian(p, a),
            Self::Beta(p) => log_prob_beta(p, a),
        }
    }

    /// Gradient of [`Self::log_prob`] with respect to the family parameters.
    ///
    /// For the squashed Gaussian the `tanh` Jacobian does not depend on the
    /// parameters, so the gradient is that of the pre-squash Gaussian at
    /// `atanh(a)`.
    pub fn grad_log_prob(&self, a: &[f64]) -> Result<ParamGrad> {
        Ok(match self {
            Self::Gaussian(p) => ParamGrad::LocScale(grad_log_prob_gaussian(p, a)?),
            Self::SquashedGaussian(p) => {
                let u = squashed::unsquash(a)?;
                ParamGrad::LocScale(grad_log_prob_gaussian(p, &u)?)
            }
            Self::StudentT(p) => ParamGrad::StudentT(grad_log_prob_student_t(p, a)?),
            Self::QGaussian(p) => ParamGrad::LocScale(grad_log_prob_q_gaussian(p, a)?),
            Self::Beta(p) => ParamGrad::Beta(grad_log_prob_beta(p, a)?),
        })
    }

    /// True when `a` has positive density.
    pub fn in_support(&self, a: &[f64]) -> bool {
        match self {
            Self::QGaussian(p) => support_contains(p, a),
            Self::SquashedGaussian(_) => a.iter().all(|x| x.abs() < 1.0),
            Self::Beta(p) => p.contains(a),
            _ => true,
        }
    }

    /// Location used for deterministic execution: `μ` for the symmetric
    /// families, `tanh(μ)` when squashed, and the Beta mean.
    pub fn mode_action(&self) -> Vec<f64> {
        match self {
            Self::Gaussian(p) => p.mu.clone(),
            Self::SquashedGaussian(p) => {
                p.mu.iter().map(|m| m.tanh().clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON)).collect()
            }
            Self::StudentT(p) => p.loc_scale.mu.clone(),
            Self::QGaussian(p) => p.loc_scale.mu.clone(),
            Self::Beta(p) => p.mean(),
        }
    }
}
