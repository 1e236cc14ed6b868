//! Policy heads: turn raw network outputs into valid distribution parameters
//! and carry log-likelihood gradients back to those outputs.
//!
//! Raw layouts (N = action dimension):
//!
//! | family            | raw outputs                         |
//! |-------------------|-------------------------------------|
//! | loc-scale         | `[mean; N] [log_std; N]`            |
//! | Student's t       | `[mean; N] [log_std; N] [nu]`       |
//! | Beta              | `[alpha; N] [beta; N]`              |
//!
//! Location-scale families put their mean at `center + half·tanh(raw)`, so
//! the mean always sits inside the action box while samples may leave it
//! (the environment clips). The squashed Gaussian instead works in
//! `(-1, 1)^N` with an unbounded pre-squash mean and is mapped affinely to
//! the box; [`PolicyHeadConfig::to_env`] and [`PolicyHeadConfig::from_env`]
//! convert between the two spaces.

use crate::distributions::{
    BetaParams, LocScaleParams, ParamGrad, PolicyDistribution, QGaussianParams, StudentTParams,
};
use crate::error::{check_dim, Error, Result};
use crate::samplers::Rng;
use crate::special::{sigmoid, softplus};
use crate::EntropicIndex;
use std::fmt;
use std::str::FromStr;

/// Smallest amount added to 1 for Beta shapes, keeping them strictly above 1.
const BETA_SHAPE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    SquashedGaussian,
    Beta,
    StudentT,
    QGaussian,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Self::Gaussian, Self::SquashedGaussian, Self::Beta, Self::StudentT, Self::QGaussian];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::SquashedGaussian => "squashed_gaussian",
            Self::Beta => "beta",
            Self::StudentT => "student_t",
            Self::QGaussian => "q_gaussian",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config(format!("unknown policy family {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyHeadConfig {
    pub family: Family,
    /// Entropic index, used by the q-Gaussian family only.
    pub q: f64,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    /// Lower bound on Student's t degrees of freedom.
    pub nu_base: f64,
    /// Number of on-policy draws searched when replacing an out-of-support
    /// action.
    pub replacement_batch: usize,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl PolicyHeadConfig {
    /// Defaults: `q = 0`, `ν_base = 1`, 32 replacement draws, log-std in
    /// `[-10, 2]`.
    pub fn new(family: Family, action_low: Vec<f64>, action_high: Vec<f64>) -> Result<Self> {
        let c = Self {
            family,
            q: 0.0,
            action_low,
            action_high,
            nu_base: 1.0,
            replacement_batch: 32,
            log_std_min: -10.0,
            log_std_max: 2.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_q(mut self, q: f64) -> Result<Self> {
        self.q = q;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.action_low.len();
        if n == 0 {
            return Err(Error::config("action dimension must be at least 1"));
        }
        check_dim(n, self.action_high.len())?;
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| !(l < h && l.is_finite() && h.is_finite())) {
            return Err(Error::config("action bounds must be finite with low < high"));
        }
        if !(self.nu_base >= 1.0) {
            return Err(Error::config(format!("nu_base must be at least 1, got {}", self.nu_base)));
        }
        if self.replacement_batch == 0 {
            return Err(Error::config("replacement batch must be at least 1"));
        }
        if !(self.log_std_min < self.log_std_max) {
            return Err(Error::config("log_std_min must be below log_std_max"));
        }
        if self.family == Family::QGaussian {
            let q = EntropicIndex::new(self.q);
            if !(self.q < 3.0) || q.is_unit() {
                return Err(Error::config(format!("q-Gaussian head needs q < 3 and q != 1, got {q}")));
            }
            if q.is_heavy_tailed() && 1.0 / (self.q - 1.0) <= 0.5 * n as f64 {
                return Err(Error::config(format!(
                    "q = {q} is not normalizable in {n} dimensions (needs q < 1 + 2/N)"
                )));
            }
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    /// Number of raw network outputs the head consumes.
    pub fn raw_dim(&self) -> usize {
        let n = self.action_dim();
        match self.family {
            Family::StudentT => 2 * n + 1,
            _ => 2 * n,
        }
    }

    fn center_half(&self, i: usize) -> (f64, f64) {
        let (l, h) = (self.action_low[i], self.action_high[i]);
        (0.5 * (l + h), 0.5 * (h - l))
    }

    /// Maps a point of the distribution's space to environment units.
    pub fn to_env(&self, x: &[f64]) -> Vec<f64> {
        match self.family {
            Family::SquashedGaussian => (0..x.len())
                .map(|i| {
                    let (c, h) = self.center_half(i);
                    c + h * x[i]
                })
                .collect(),
            _ => x.to_vec(),
        }
    }

    /// Inverse of [`Self::to_env`]. Squashed actions on the box boundary are
    /// pulled just inside so their log-density stays finite.
    pub fn from_env(&self, a: &[f64]) -> Vec<f64> {
        match self.family {
            Family::SquashedGaussian => (0..a.len())
                .map(|i| {
                    let (c, h) = self.center_half(i);
                    ((a[i] - c) / h).clamp(-1.0 + 1e-6, 1.0 - 1e-6)
                })
                .collect(),
            _ => a.to_vec(),
        }
    }

    /// Clips an environment action to the box.
    pub fn clip(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }
}

/// Distribution produced by a head together with the raw outputs it came
/// from.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyHeadOutput {
    pub dist: PolicyDistribution,
    pub raw: Vec<f64>,
}

impl PolicyHeadOutput {
    /// A draw in environment units (not clipped).
    pub fn sample_env(&self, config: &PolicyHeadConfig, rng: &mut Rng) -> Vec<f64> {
        config.to_env(&self.dist.sample(rng))
    }

    /// Deterministic action in environment units.
    pub fn mean_env(&self, config: &PolicyHeadConfig) -> Vec<f64> {
        config.to_env(&self.dist.mode_action())
    }
}

pub fn head_forward(config: &PolicyHeadConfig, raw: &[f64]) -> Result<PolicyHeadOutput> {
    check_dim(config.raw_dim(), raw.len())?;
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite network output"));
    }
    let n = config.action_dim();
    let loc_scale = || -> Result<LocScaleParams> {
        let mu: Vec<f64> = (0..n)
            .map(|i| {
                if config.family == Family::SquashedGaussian {
                    raw[i]
                } else {
                    let (c, h) = config.center_half(i);
                    c + h * raw[i].tanh()
                }
            })
            .collect();
        let sigma: Vec<f64> = raw[n..2 * n]
            .iter()
            .map(|r| r.clamp(config.log_std_min, config.log_std_max).exp())
            .collect();
        LocScaleParams::diagonal(mu, &sigma)
    };
    let dist = match config.family {
        Family::Gaussian => PolicyDistribution::Gaussian(loc_scale()?),
        Family::SquashedGaussian => PolicyDistribution::SquashedGaussian(loc_scale()?),
        Family::StudentT => PolicyDistribution::StudentT(StudentTParams::new(
            loc_scale()?,
            config.nu_base + softplus(raw[2 * n]),
        )?),
        Family::QGaussian => {
            PolicyDistribution::QGaussian(QGaussianParams::new(loc_scale()?, config.q)?)
        }
        Family::Beta => {
            let shape = |r: &f64| 1.0 + softplus(*r).max(BETA_SHAPE_FLOOR);
            PolicyDistribution::Beta(BetaParams::new(
                raw[..n].iter().map(shape).collect(),
                raw[n..].iter().map(shape).collect(),
                config.action_low.clone(),
                config.action_high.clone(),
            )?)
        }
    };
    Ok(PolicyHeadOutput { dist, raw: raw.to_vec() })
}

/// Chain rule from distribution-parameter gradients to raw outputs.
pub fn head_backward(config: &PolicyHeadConfig, out: &PolicyHeadOutput, grad: &ParamGrad) -> Result<Vec<f64>> {
    let n = config.action_dim();
    let raw = &out.raw;
    check_dim(config.raw_dim(), raw.len())?;
    let mut g = vec![0.0; raw.len()];
    let loc_scale = |g: &mut [f64], ls: &LocScaleParams, grad: &crate::distributions::LocScaleGrad| {
        let d_sigma = grad.diag_scale(&ls.scale_chol);
        for i in 0..n {
            g[i] = if config.family == Family::SquashedGaussian {
                grad.mu[i]
            } else {
                let t = raw[i].tanh();
                grad.mu[i] * config.center_half(i).1 * (1.0 - t * t)
            };
            let r = raw[n + i];
            if r > config.log_std_min && r < config.log_std_max {
                g[n + i] = d_sigma[i] * ls.scale_chol.get(i, i);
            }
        }
    };
    match (&out.dist, grad) {
        (
            PolicyDistribution::Gaussian(ls)
            | PolicyDistribution::SquashedGaussian(ls)
            | PolicyDistribution::QGaussian(QGaussianParams { loc_scale: ls, .. }),
            ParamGrad::LocScale(gr),
        ) => loc_scale(&mut g, ls, gr),
        (PolicyDistribution::StudentT(p), ParamGrad::StudentT(gr)) => {
            loc_scale(&mut g, &p.loc_scale, &gr.loc_scale);
            g[2 * n] = gr.nu * sigmoid(raw[2 * n]);
        }
        (PolicyDistribution::Beta(_), ParamGrad::Beta(gr)) => {
            for i in 0..n {
                for (k, d) in [(i, gr.alpha[i]), (n + i, gr.beta[i])] {
                    if softplus(raw[k]) > BETA_SHAPE_FLOOR {
                        g[k] = d * sigmoid(raw[k]);
                    }
                }
            }
        }
        _ => return Err(Error::domain("gradient kind does not match the policy family")),
    }
    Ok(g)
}

/// Chain rule from a gradient on [`PolicyHeadOutput::mean_env`] to raw
/// outputs. Only the location (or Beta shape) entries receive gradient.
#[allow(clippy::needless_range_loop)]
pub fn head_mean_backward(config: &PolicyHeadConfig, out: &PolicyHeadOutput, grad_mean: &[f64]) -> Result<Vec<f64>> {
    let n = config.action_dim();
    check_dim(n, grad_mean.len())?;
    check_dim(config.raw_dim(), out.raw.len())?;
    let raw = &out.raw;
    let mut g = vec![0.0; raw.len()];
    match &out.dist {
        PolicyDistribution::Beta(p) => {
            for i in 0..n {
                let (a, b) = (p.alpha[i], p.beta[i]);
                let width = config.action_high[i] - config.action_low[i];
                let s2 = (a + b) * (a + b);
                for (k, d) in [(i, width * b / s2), (n + i, -width * a / s2)] {
                    if softplus(raw[k]) > BETA_SHAPE_FLOOR {
                        g[k] = grad_mean[i] * d * sigmoid(raw[k]);
                    }
                }
            }
        }
        PolicyDistribution::SquashedGaussian(_) => {
            for i in 0..n {
                let t = raw[i].tanh();
                if t.abs() < 1.0 - f64::EPSILON {
                    g[i] = grad_mean[i] * config.center_half(i).1 * (1.0 - t * t);
                }
            }
        }
        _ => {
            for i in 0..n {
                let t = raw[i].tanh();
                g[i] = grad_mean[i] * config.center_half(i).1 * (1.0 - t * t);
            }
        }
    }
    Ok(g)
}

/// Log-density of `a` (distribution space) and the action it was evaluated
/// at. A light-tailed q-Gaussian replaces an out-of-support `a` by the
/// closest of `replacement_batch` on-policy draws.
pub fn log_prob_with_replacement(
    config: &PolicyHeadConfig,
    out: &PolicyHeadOutput,
    a: &[f64],
    rng: &mut Rng,
) -> Result<(f64, Vec<f64>)> {
    let lp = out.dist.log_prob(a)?;
    if lp > f64::NEG_INFINITY {
        return Ok((lp, a.to_vec()));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..config.replacement_batch {
        let s = out.dist.sample(rng);
        let d: f64 = s.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, s));
        }
    }
    let (_, s) = best.expect("at least one replacement draw");
    let lp = out.dist.log_prob(&s)?;
    if lp == f64::NEG_INFINITY {
        return Err(Error::domain("replacement draw fell outside the support"));
    }
    Ok((lp, s))
}
