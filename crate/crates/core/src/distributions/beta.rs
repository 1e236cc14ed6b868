use crate::error::{check_dim, Error, Result};
use crate::special::{ln_beta, psi};

/// Product of independent Beta densities, each affinely rescaled from
/// `(0, 1)` onto `(low_i, high_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

/// Gradients of the Beta log-density with respect to `α` and `β`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaGrad {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BetaParams {
    /// Shapes must exceed 1 so the density is bell-shaped.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(Error::domain("Beta policy needs at least one dimension"));
        }
        check_dim(n, beta.len())?;
        check_dim(n, low.len())?;
        check_dim(n, high.len())?;
        for i in 0..n {
            if !(alpha[i] > 1.0 && beta[i] > 1.0) || !alpha[i].is_finite() || !beta[i].is_finite()
            {
                return Err(Error::domain(format!(
                    "Beta shapes must exceed 1, got alpha={} beta={}",
                    alpha[i], beta[i]
                )));
            }
            if !(low[i] < high[i]) {
                return Err(Error::domain(format!(
                    "Beta bounds must satisfy low < high, got [{}, {}]",
                    low[i], high[i]
                )));
            }
        }
        Ok(Self { alpha, beta, action_low: low, action_high: high })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim()
            && a.iter()
                .enumerate()
                .all(|(i, x)| *x > self.action_low[i] && *x < self.action_high[i])
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let m = self.alpha[i] / (self.alpha[i] + self.beta[i]);
                self.action_low[i] + m * (self.action_high[i] - self.action_low[i])
            })
            .collect()
    }

    fn unit(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), a.len())?;
        if !self.contains(a) {
            return Err(Error::domain("Beta action must lie strictly inside the bounds"));
        }
        Ok((0..self.dim())
            .map(|i| (a[i] - self.action_low[i]) / (self.action_high[i] - self.action_low[i]))
            .collect())
    }
}

/// `Σ_i [(α-1) ln x + (β-1) ln(1-x) - ln B(α, β) - ln(high - low)]`.
pub fn log_prob_beta(params: &BetaParams, a: &[f64]) -> Result<f64> {
    let x = params.unit(a)?;
    Ok((0..params.dim())
        .map(|i| {
            let (al, be) = (params.alpha[i], params.beta[i]);
            (al - 1.0) * x[i].ln() + (be - 1.0) * (-x[i]).ln_1p()
                - ln_beta(al, be)
                - (params.action_high[i] - params.action_low[i]).ln()
        })
        .sum())
}

/// `∂/∂α = ln x - ψ(α) + ψ(α+β)`, `∂/∂β = ln(1-x) - ψ(β) + ψ(α+β)`.
pub fn grad_log_prob_beta(params: &BetaParams, a: &[f64]) -> Result<BetaGrad> {
    let x = params.unit(a)?;
    let mut alpha = Vec::with_capacity(x.len());
    let mut beta = Vec::with_capacity(x.len());
    for (i, xi) in x.iter().enumerate() {
        let (al, be) = (params.alpha[i], params.beta[i]);
        let common = psi(al + be);
        alpha.push(xi.ln() - psi(al) + common);
        beta.push((-xi).ln_1p() - psi(be) + common);
    }
    Ok(BetaGrad { alpha, beta })
}
