use super::{gaussian::log_prob_gaussian, LocScaleParams};
use crate::error::{Error, Result};

/// Floor added inside the `tanh` log-Jacobian.
pub const SQUASH_EPSILON: f64 = 1e-6;

pub(crate) fn unsquash(a: &[f64]) -> Result<Vec<f64>> {
    a.iter()
        .map(|&x| {
            if x.abs() < 1.0 {
                Ok(x.atanh())
            } else {
                Err(Error::domain(format!(
                    "squashed action components must lie in (-1, 1), got {x}"
                )))
            }
        })
        .collect()
}

/// `ln N(atanh a; μ, Σ) - Σ_i ln(1 - a_i² + ε)`.
pub fn log_prob_squashed_gaussian(params: &LocScaleParams, a: &[f64]) -> Result<f64> {
    let u = unsquash(a)?;
    let jac: f64 = a.iter().map(|x| (1.0 - x * x + SQUASH_EPSILON).ln()).sum();
    Ok(log_prob_gaussian(params, &u)? - jac)
}
