//! Exact random-variate generation for every policy family.
//!
//! q-Gaussians use the generalized Box-Müller transform (all `q < 3`) or, for
//! light tails, the bounded-radius stochastic representation
//! `t = μ + r L u` with `u` uniform on the unit sphere and
//! `r² (1-q)/2 ~ Beta(N/2, (2-q)/(1-q))`.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use rand::distr::Open01;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};

use crate::deformed::{gbmm_index_inverse, ln_q, EntropicIndex};
use crate::distributions::{BetaParams, LocScaleParams, PolicyDistribution, QGaussianParams, StudentTParams};
use crate::error::{Error, Result};

/// What a random stream is used for. Distinct purposes never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Init,
    Exploration,
    Update,
    Evaluation,
    Environment,
    Dataset,
    Validation,
    Other(u32),
}

impl StreamPurpose {
    fn code(self) -> u64 {
        match self {
            Self::Init => 1,
            Self::Exploration => 2,
            Self::Update => 3,
            Self::Evaluation => 4,
            Self::Environment => 5,
            Self::Dataset => 6,
            Self::Validation => 7,
            Self::Other(k) => 0x1000 + k as u64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seedable generator. Identical seeds give identical streams on every
/// platform.
#[derive(Clone, Debug)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream for a `(run, seed, purpose)` triple.
    pub fn stream(run_id: u64, seed: u64, purpose: StreamPurpose) -> Self {
        let mixed = splitmix64(splitmix64(splitmix64(run_id) ^ seed) ^ purpose.code());
        Self::seed_from(mixed)
    }

    /// Derive a child stream, advancing this one.
    pub fn fork(&mut self) -> Self {
        let s = self.0.random::<u64>();
        Self::seed_from(splitmix64(s))
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        self.0.sample(Open01)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    /// Gamma variate with unit scale.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        // Shape validity is guaranteed by the callers' parameter checks.
        let g = Gamma::new(shape, 1.0).expect("gamma shape must be positive");
        self.0.sample(g)
    }

    /// Beta variate on `(0, 1)` from two gamma variates.
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        let x = self.gamma(a);
        let y = self.gamma(b);
        x / (x + y)
    }
}

impl Deref for Rng {
    type Target = ChaCha8Rng;
    fn deref(&self) -> &ChaCha8Rng {
        &self.0
    }
}

impl DerefMut for Rng {
    fn deref_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

/// A point on the unit sphere `S^{N-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereSample {
    pub u: Vec<f64>,
}

/// Rotationally invariant unit vector from a normalized Gaussian draw.
pub fn sample_uniform_sphere(n: usize, rng: &mut Rng) -> SphereSample {
    assert!(n >= 1, "sphere dimension must be at least 1");
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return SphereSample { u: g.into_iter().map(|v| v / norm).collect() };
        }
    }
}

/// One standard q-Gaussian variate (density `∝ exp_q(-z²/2)`) via the
/// generalized Box-Müller transform.
///
/// The raw transform `√(-2 ln_g u₁) cos(2π u₂)` with generator index
/// `g = (q'+1)/(3-q')` has density `∝ exp_{q'}(-z²/(3-q'))`; it is rescaled
/// by `√(2/(3-q'))` to the unit-scale convention used by the densities.
pub fn sample_gbmm_standard(q_target: impl Into<EntropicIndex>, rng: &mut Rng) -> Result<f64> {
    let qt = q_target.into();
    let qg = gbmm_index_inverse(qt)?;
    let u1 = rng.open01();
    let u2 = rng.uniform();
    let radius = (-2.0 * ln_q(u1, qg)?).max(0.0).sqrt();
    Ok(radius * (2.0 * PI * u2).cos() * (2.0 / (3.0 - qt.get())).sqrt())
}

/// `μ + L z` with every component of `z` an independent Box-Müller draw.
///
/// This is the product of one-dimensional q-Gaussians, which equals the
/// multivariate q-Gaussian only when `N = 1`.
pub fn sample_q_gaussian_gbmm(params: &QGaussianParams, rng: &mut Rng) -> Result<Vec<f64>> {
    let n = params.loc_scale.dim();
    let z = (0..n)
        .map(|_| sample_gbmm_standard(params.q, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(shift_scale(&params.loc_scale, &z))
}

/// Light-tailed sampler `t = μ + r L u`, always inside the support ellipsoid.
pub fn sample_stochastic_rep(params: &QGaussianParams, rng: &mut Rng) -> Result<Vec<f64>> {
    let q = params.q.get();
    if !params.q.is_light_tailed() {
        return Err(Error::domain(format!("stochastic representation needs q < 1, got {q}")));
    }
    let n = params.loc_scale.dim();
    let ratio = rng.beta(0.5 * n as f64, (2.0 - q) / (1.0 - q));
    let r = (2.0 / (1.0 - q) * ratio).sqrt();
    let u = sample_uniform_sphere(n, rng).u;
    let z: Vec<f64> = u.iter().map(|ui| r * ui).collect();
    Ok(shift_scale(&params.loc_scale, &z))
}

/// Heavy-tailed multivariate draw as a scale mixture:
/// `z = g √(2k / W)`, `W ~ χ²_{2k-N}`, `k = 1/(q-1)`.
fn sample_heavy_elliptical(params: &QGaussianParams, rng: &mut Rng) -> Vec<f64> {
    let n = params.loc_scale.dim();
    let k = 1.0 / (params.q.get() - 1.0);
    let w = 2.0 * rng.gamma(k - 0.5 * n as f64);
    let s = (2.0 * k / w).sqrt();
    let z: Vec<f64> = (0..n).map(|_| s * rng.normal()).collect();
    shift_scale(&params.loc_scale, &z)
}

/// Exact multivariate q-Gaussian draw: stochastic representation for light
/// tails, Box-Müller in one dimension, and the Student-type scale mixture for
/// heavy tails in several dimensions.
pub fn sample_q_gaussian(params: &QGaussianParams, rng: &mut Rng) -> Vec<f64> {
    if params.q.is_light_tailed() {
        return sample_stochastic_rep(params, rng).expect("light-tailed index");
    }
    if params.loc_scale.dim() == 1 {
        return sample_q_gaussian_gbmm(params, rng).expect("valid q-Gaussian index");
    }
    sample_heavy_elliptical(params, rng)
}

fn shift_scale(ls: &LocScaleParams, z: &[f64]) -> Vec<f64> {
    ls.scale_chol
        .mul_vec(z)
        .into_iter()
        .zip(&ls.mu)
        .map(|(v, m)| v + m)
        .collect()
}

pub fn sample_gaussian(params: &LocScaleParams, rng: &mut Rng) -> Vec<f64> {
    let z: Vec<f64> = (0..params.dim()).map(|_| rng.normal()).collect();
    shift_scale(params, &z)
}

/// `tanh` of a Gaussian draw, kept strictly inside `(-1, 1)`.
pub fn sample_squashed_gaussian(params: &LocScaleParams, rng: &mut Rng) -> Vec<f64> {
    const EDGE: f64 = 1.0 - f64::EPSILON;
    sample_gaussian(params, rng)
        .into_iter()
        .map(|u| u.tanh().clamp(-EDGE, EDGE))
        .collect()
}

/// `μ + L g / √(W/ν)` with `W ~ χ²_ν` shared across dimensions.
pub fn sample_student_t(params: &StudentTParams, rng: &mut Rng) -> Vec<f64> {
    let n = params.loc_scale.dim();
    let w = 2.0 * rng.gamma(0.5 * params.nu);
    let s = (params.nu / w).sqrt();
    let z: Vec<f64> = (0..n).map(|_| s * rng.normal()).collect();
    shift_scale(&params.loc_scale, &z)
}

/// Independent Beta draws rescaled to the action bounds, strictly inside.
pub fn sample_beta(params: &BetaParams, rng: &mut Rng) -> Vec<f64> {
    (0..params.dim())
        .map(|i| {
            let (lo, hi) = (params.action_low[i], params.action_high[i]);
            let x = rng.beta(params.alpha[i], params.beta[i]);
            let a = lo + x * (hi - lo);
            if a <= lo || a >= hi {
                // Gamma underflow can land exactly on a bound.
                let eps = (hi - lo) * 1e-12;
                a.clamp(lo + eps, hi - eps)
            } else {
                a
            }
        })
        .collect()
}

impl PolicyDistribution {
    /// One exact draw from the distribution.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Self::Gaussian(p) => sample_gaussian(p, rng),
            Self::SquashedGaussian(p) => sample_squashed_gaussian(p, rng),
            Self::StudentT(p) => sample_student_t(p, rng),
            Self::QGaussian(p) => sample_q_gaussian(p, rng),
            Self::Beta(p) => sample_beta(p, rng),
        }
    }
}
