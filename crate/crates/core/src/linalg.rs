//! Small dense helpers for lower-triangular scale factors.
//!
//! Matrices are row-major `Vec<f64>` of length `n * n`.

use crate::error::{check_dim, Error, Result};

/// Lower-triangular Cholesky factor `L` of a covariance `Σ = L Lᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>,
    diagonal: bool,
}

impl CholeskyFactor {
    /// Diagonal factor with the given standard deviations.
    pub fn from_diagonal(scales: &[f64]) -> Result<Self> {
        let n = scales.len();
        if n == 0 {
            return Err(Error::domain("scale factor needs at least one dimension"));
        }
        let mut lower = vec![0.0; n * n];
        for (i, &s) in scales.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::domain(format!("scale {i} must be positive, got {s}")));
            }
            lower[i * n + i] = s;
        }
        Ok(Self { n, lower, diagonal: true })
    }

    /// Wrap a row-major lower-triangular matrix. Entries above the diagonal
    /// are ignored.
    pub fn from_lower(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("scale factor needs at least one dimension"));
        }
        check_dim(n * n, data.len())?;
        let mut diagonal = true;
        for i in 0..n {
            for j in 0..n {
                let v = &mut data[i * n + j];
                if j > i {
                    *v = 0.0;
                } else if !v.is_finite() {
                    return Err(Error::domain("scale factor entries must be finite"));
                } else if j == i && *v <= 0.0 {
                    return Err(Error::domain(format!(
                        "scale factor diagonal must be positive, got {} at {i}",
                        *v
                    )));
                } else if j < i && *v != 0.0 {
                    diagonal = false;
                }
            }
        }
        Ok(Self { n, lower: data, diagonal })
    }

    /// Cholesky decomposition of a symmetric positive-definite covariance.
    pub fn from_covariance(n: usize, cov: &[f64]) -> Result<Self> {
        check_dim(n * n, cov.len())?;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = cov[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::domain("covariance is not positive definite"));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Self::from_lower(n, l)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lower
    }

    /// Diagonal entries of `L` (the standard deviations when diagonal).
    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `ln |Σ| = 2 Σ_i ln L_ii`.
    pub fn log_det_covariance(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    /// `L z`.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        if self.diagonal {
            return (0..n).map(|i| self.lower[i * n + i] * z[i]).collect();
        }
        (0..n)
            .map(|i| (0..=i).map(|j| self.lower[i * n + j] * z[j]).sum())
            .collect()
    }

    /// Solve `L y = r` by forward substitution.
    pub fn solve_lower(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = r[i];
            for (l, yj) in self.lower[i * n..i * n + i].iter().zip(&y) {
                s -= l * yj;
            }
            y[i] = s / self.lower[i * n + i];
        }
        y
    }

    /// Solve `Lᵀ x = y` by back substitution.
    pub fn solve_upper_transposed(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.lower[j * n + i] * xj;
            }
            x[i] = s / self.lower[i * n + i];
        }
        x
    }

    /// Mahalanobis form `m = rᵀ Σ⁻¹ r` together with `w = Σ⁻¹ r`.
    pub fn mahalanobis(&self, r: &[f64]) -> (f64, Vec<f64>) {
        if self.diagonal {
            let n = self.n;
            let mut m = 0.0;
            let w = (0..n)
                .map(|i| {
                    let s = self.lower[i * n + i];
                    m += (r[i] / s).powi(2);
                    r[i] / (s * s)
                })
                .collect();
            return (m, w);
        }
        let y = self.solve_lower(r);
        let m = y.iter().map(|v| v * v).sum();
        (m, self.solve_upper_transposed(&y))
    }

    /// `Σ = L Lᵀ`.
    pub fn covariance(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum();
            }
        }
        out
    }

    /// `Σ⁻¹`, column by column through the two triangular solves.
    pub fn covariance_inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve_upper_transposed(&self.solve_lower(&e));
            for r in 0..n {
                out[r * n + c] = col[r];
            }
        }
        out
    }

    /// Chain a gradient with respect to the covariance to the factor:
    /// `dL = lower((G + Gᵀ) L)`.
    pub fn chain_covariance_grad(&self, grad_cov: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                out[i * n + j] = (j..n)
                    .map(|k| (grad_cov[i * n + k] + grad_cov[k * n + i]) * self.get(k, j))
                    .sum();
            }
        }
        out
    }
}
